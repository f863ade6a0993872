//! Experiment plumbing: the fixed-antenna benchmark, the solver front end,
//! exhaustive grid search, sweeps, oracle validation and file emission.

mod benchmark;
mod emit;
mod grid;
mod sweep;
mod validate;

pub use benchmark::{solve_benchmark, BenchmarkSolution};
pub use emit::{emit, plot_svg, read_csv, write_csv};
pub use grid::{grid_search, GridSearchResult, DEFAULT_GRID_BUDGET};
pub use sweep::{sweep_epsilon, sweep_snr, sweep_users, Method, SweepAggregate, SweepResult, SweepRow, SweepSettings};
pub use validate::{validate, OracleCheck, ValidationReport};

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::TpaPositions;
use crate::multi_pa::{optimal_beamformers, solve_multi_start, LbfgsOptions, Termination};
use crate::scenario::Scenario;
use crate::single_pa::{pgd_solve, PgdOptions};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SolveOptions {
    pub pgd: PgdOptions,
    pub lbfgs: LbfgsOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Pgd,
    Lbfgs,
}

/// Result of the proposed method, whichever solver ran.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub solver: Solver,
    pub x_star: TpaPositions,
    pub beamformers: Vec<Vec<Complex64>>,
    pub total_power_w: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Option<Termination>,
}

/// Projected gradient descent for `N = 1`, projected L-BFGS otherwise.
/// Both start from the benchmark position.
pub fn solve(scenario: &Scenario, options: &SolveOptions) -> Result<Solution> {
    if scenario.num_tpas() == 1 {
        let sol = pgd_solve(scenario, &options.pgd)?;
        let x_star = TpaPositions::new(vec![sol.x_star], scenario.side())?;
        let beamformers = optimal_beamformers(&x_star, scenario)?;
        return Ok(Solution {
            solver: Solver::Pgd,
            x_star,
            beamformers,
            total_power_w: sol.total_power_w,
            iterations: sol.iterations,
            converged: sol.converged,
            termination: None,
        });
    }
    let sol = solve_multi_start(scenario, &options.lbfgs)?;
    Ok(Solution {
        solver: Solver::Lbfgs,
        x_star: sol.x_star,
        beamformers: sol.beamformers,
        total_power_w: sol.total_power_w,
        iterations: sol.iterations,
        converged: sol.converged,
        termination: Some(sol.termination),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::TpaPositions;
    use crate::expected_snr::build_expected_matrix;
    use crate::scenario::ScenarioConfig;

    #[test]
    fn emitted_solutions_are_feasible() {
        for n in [1, 3] {
            let sc = ScenarioConfig { num_tpas: n, num_users: 6, seed: 5, ..Default::default() }.build().unwrap();
            let sol = solve(&sc, &SolveOptions::default()).unwrap();
            let x = TpaPositions::new(sol.x_star.as_slice().to_vec(), 20.0).unwrap();
            let mut total = 0.0;
            for (u, w) in sc.users.iter().zip(&sol.beamformers) {
                let a = build_expected_matrix(&x, u, &sc.constants, &sc.layout).unwrap();
                let snr = a.quad_form(w) / u.noise_power_w;
                assert!((snr - u.snr_target_linear).abs() <= 1e-8 * u.snr_target_linear);
                total += w.iter().map(|v| v.norm_sqr()).sum::<f64>();
            }
            assert!((total - sol.total_power_w).abs() <= 1e-10 * total);
        }
    }
}
