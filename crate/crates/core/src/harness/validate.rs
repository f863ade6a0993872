use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::TpaPositions;
use crate::expected_snr::{build_expected_matrix, exact_snr_moments, monte_carlo_for_user, user_channel};
use crate::multi_pa::{gradient_multi, objective_multi, optimal_beamformer, FD_STEP};
use crate::scenario::Scenario;
use crate::{Error, Result};

/// Monte-Carlo z-scores above this fail.
pub const MC_Z_LIMIT: f64 = 4.5;
/// Componentwise relative gradient error limit.
pub const GRADIENT_TOLERANCE: f64 = 1e-4;
/// Random directions tried per (position, user) in the beamformer check.
pub const RANDOM_DIRECTIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub cases: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<OracleCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &str, deviations: &[f64], tolerance: f64) -> OracleCheck {
    let max_deviation = deviations.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    OracleCheck {
        name: name.into(),
        cases: deviations.len(),
        max_deviation,
        tolerance,
        passed: max_deviation <= tolerance,
    }
}

/// Runs the three oracle families at the benchmark position and two seeded
/// random positions:
///
/// * `monte_carlo_snr`: z-score of the sampled mean SNR against `w^H A w / sigma^2`
///   under the optimal beamformer, using the exact standard error from
///   enumerating the blockage states (zero-variance cases must match to
///   1e-12);
/// * `gradient_fd`: relative error of the analytic gradient against central
///   differences;
/// * `beamformer_optimality`: relative power excess of the closed-form
///   beamformer over random directions scaled to meet the target (never
///   positive beyond rounding).
pub fn validate(scenario: &Scenario, samples: u64, seed: u64) -> Result<ValidationReport> {
    if scenario.users.is_empty() {
        return Err(Error::InvalidConfig("validation needs at least one user".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidConfig("validation needs at least one Monte-Carlo sample".into()));
    }
    let side = scenario.side();
    let n = scenario.num_tpas();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![scenario.layout.center_positions()];
    for _ in 0..2 {
        points.push((0..n).map(|_| rng.gen::<f64>() * side).collect());
    }

    let (mut mc, mut grad, mut beam) = (Vec::new(), Vec::new(), Vec::new());
    for (k, x) in points.iter().enumerate() {
        let positions = TpaPositions::new(x.clone(), side)?;
        for (m, user) in scenario.users.iter().enumerate() {
            let a = build_expected_matrix(&positions, user, &scenario.constants, &scenario.layout)?;
            let w = optimal_beamformer(&a, user)?;
            let exact = a.quad_form(&w) / user.noise_power_w;
            let stream = seed.wrapping_add((k * scenario.num_users() + m) as u64 + 1);
            let est =
                monte_carlo_for_user(&positions, &w, user, &scenario.constants, &scenario.layout, samples, stream)?;
            let (gains, probs) = user_channel(&positions, user, &scenario.constants, &scenario.layout)?;
            let std_error = exact_snr_moments(&gains, &probs, &w, user.noise_power_w)
                .map_or(est.std_error, |(_, var)| (var / samples as f64).sqrt());
            mc.push(if std_error > 0.0 {
                (est.mean - exact).abs() / std_error
            } else if (est.mean - exact).abs() <= 1e-12 * exact {
                0.0
            } else {
                f64::INFINITY
            });

            let power: f64 = w.iter().map(|v| v.norm_sqr()).sum();
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..RANDOM_DIRECTIONS {
                let mu: Vec<Complex64> =
                    (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                let gain = a.quad_form(&mu);
                if gain > 0.0 {
                    let norm: f64 = mu.iter().map(|v| v.norm_sqr()).sum();
                    worst = worst.max((power - user.required_power() * norm / gain) / power);
                }
            }
            beam.push(worst);
        }

        let g = gradient_multi(x, scenario)?.values;
        let h = FD_STEP * side;
        let fd: Vec<f64> = (0..n)
            .map(|i| {
                let mut plus = x.clone();
                let mut minus = x.clone();
                plus[i] += h;
                minus[i] -= h;
                Ok((objective_multi(&plus, scenario)? - objective_multi(&minus, scenario)?) / (2.0 * h))
            })
            .collect::<Result<_>>()?;
        let floor = 1e-6 * g.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        for (a, b) in g.iter().zip(&fd) {
            let scale = a.abs().max(b.abs()).max(floor);
            grad.push(if scale > 0.0 { (a - b).abs() / scale } else { 0.0 });
        }
    }

    Ok(ValidationReport {
        checks: vec![
            check("monte_carlo_snr", &mc, MC_Z_LIMIT),
            check("gradient_fd", &grad, GRADIENT_TOLERANCE),
            check("beamformer_optimality", &beam, 1e-12),
        ],
    })
}
