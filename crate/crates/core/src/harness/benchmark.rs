use num_complex::Complex64;
use serde::Serialize;

use crate::channel::TpaPositions;
use crate::multi_pa::{objective_multi, optimal_beamformers};
use crate::scenario::Scenario;
use crate::single_pa::objective_single;
use crate::Result;

/// Every TPA pinned at the waveguide centre; only the beamformers adapt.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkSolution {
    pub positions: TpaPositions,
    pub beamformers: Vec<Vec<Complex64>>,
    pub total_power_w: f64,
}

/// The total power is computed exactly as the solvers evaluate their start
/// point (closed form for `N = 1`, eigenvalues otherwise), so a run that
/// descends from the centre can be compared with it bit for bit.
pub fn solve_benchmark(scenario: &Scenario) -> Result<BenchmarkSolution> {
    let centre = scenario.layout.center_positions();
    let total_power_w = if scenario.num_tpas() == 1 {
        objective_single(centre[0], &scenario.users, &scenario.constants, &scenario.layout)
    } else {
        objective_multi(&centre, scenario)?
    };
    let positions = TpaPositions::new(centre, scenario.side())?;
    let beamformers = optimal_beamformers(&positions, scenario)?;
    Ok(BenchmarkSolution { positions, beamformers, total_power_w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{solve, SolveOptions};
    use crate::scenario::{PhysicalConstants, ScenarioConfig, User, WaveguideLayout};

    #[test]
    fn positions_are_exactly_centred() {
        let sc = ScenarioConfig { num_tpas: 3, ..Default::default() }.build().unwrap();
        let b = solve_benchmark(&sc).unwrap();
        assert!(b.positions.as_slice().iter().all(|&x| x == 10.0));
        let total: f64 = b.beamformers.iter().flatten().map(|w| w.norm_sqr()).sum();
        assert!((total - b.total_power_w).abs() <= 1e-12 * total);
    }

    #[test]
    fn centred_user_makes_benchmark_optimal() {
        let consts = PhysicalConstants::derive(28e9, 1.4, 0.05).unwrap();
        let layout = WaveguideLayout::build(1, 20.0, 10.0).unwrap();
        let user = User { position_m: [10.0, 0.0, 0.0], snr_target_linear: 100.0, noise_power_w: 1e-14 };
        let sc = Scenario::new(consts, layout, vec![user], 0).unwrap();
        let b = solve_benchmark(&sc).unwrap();
        let p = solve(&sc, &SolveOptions::default()).unwrap();
        assert_eq!(b.total_power_w, p.total_power_w);
    }

    #[test]
    fn proposed_never_exceeds_benchmark() {
        for seed in 0..6 {
            for n in [1, 2, 4] {
                let sc = ScenarioConfig { num_tpas: n, seed, ..Default::default() }.build().unwrap();
                let b = solve_benchmark(&sc).unwrap();
                let p = solve(&sc, &SolveOptions::default()).unwrap();
                assert!(p.total_power_w <= b.total_power_w);
            }
        }
    }
}
