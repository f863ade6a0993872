//! The one-antenna problem.
//!
//! With a single TPA each user's SNR constraint is tight at the optimum, so
//! the per-user power has the closed form `P_m(x) = c~_m t_m e^{eps t_m}`
//! with `t_m = (x - q_m1)^2 + z_m` and `c~_m = sigma_m^2 c_m / eta`. Every
//! `P_m` is convex in `x`, so projected gradient descent on `sum_m P_m(x)`
//! over `[0, L]` finds the global optimum.

use serde::Serialize;

use crate::scenario::{PhysicalConstants, Scenario, User, WaveguideLayout};
use crate::{Error, Result};

/// `t_m(x)`, the squared distance from the TPA at `x` to `user`, split as
/// `(x - q_m1)^2 + z_m`.
fn squared_distance(x: f64, user: &User, layout: &WaveguideLayout) -> f64 {
    let [q1, q2, _] = user.position_m;
    let z = (q2 - layout.waveguide_y_m[0]).powi(2) + layout.height_m.powi(2);
    (x - q1).powi(2) + z
}

fn scaled_target(user: &User, consts: &PhysicalConstants) -> f64 {
    user.required_power() / consts.path_gain_const
}

/// Minimum power that meets `user`'s expected-SNR target with the TPA at `x`.
pub fn power_closed_form(x: f64, user: &User, consts: &PhysicalConstants, layout: &WaveguideLayout) -> f64 {
    let t = squared_distance(x, user, layout);
    scaled_target(user, consts) * t * (consts.blockage_density_per_m2 * t).exp()
}

pub fn objective_single(x: f64, users: &[User], consts: &PhysicalConstants, layout: &WaveguideLayout) -> f64 {
    users.iter().map(|u| power_closed_form(x, u, consts, layout)).sum()
}

/// `d/dx sum_m P_m(x) = sum_m c~_m 2 (x - q_m1) e^{eps t_m} (1 + eps t_m)`.
pub fn gradient_single(x: f64, users: &[User], consts: &PhysicalConstants, layout: &WaveguideLayout) -> f64 {
    let eps = consts.blockage_density_per_m2;
    users
        .iter()
        .map(|u| {
            let t = squared_distance(x, u, layout);
            scaled_target(u, consts) * 2.0 * (x - u.position_m[0]) * (eps * t).exp() * (1.0 + eps * t)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PgdOptions {
    pub max_iter: usize,
    /// Stop once `|x - P[x - L^2 g / f]| <= stationarity_tol * L`.
    pub stationarity_tol: f64,
    pub armijo: f64,
    pub shrink: f64,
    /// Start point; the waveguide centre when `None`.
    pub initial_x: Option<f64>,
}

impl Default for PgdOptions {
    fn default() -> Self {
        Self { max_iter: 10_000, stationarity_tol: 1e-9, armijo: 1e-4, shrink: 0.5, initial_x: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PgdStep {
    pub iteration: usize,
    pub x: f64,
    pub objective_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinglePaSolution {
    pub x_star: f64,
    pub powers_w: Vec<f64>,
    pub total_power_w: f64,
    pub trace: Vec<PgdStep>,
    pub converged: bool,
    pub iterations: usize,
}

/// `f(y) - f(x)` without the cancellation of subtracting two evaluations:
/// with `dt = t(y) - t(x)`, `psi(t_y) - psi(t_x) = dt e^{eps t_y} + t_x e^{eps t_x} expm1(eps dt)`.
fn objective_difference(x: f64, y: f64, users: &[User], consts: &PhysicalConstants, layout: &WaveguideLayout) -> f64 {
    let eps = consts.blockage_density_per_m2;
    users
        .iter()
        .map(|u| {
            let t_x = squared_distance(x, u, layout);
            let t_y = squared_distance(y, u, layout);
            let dt = (y - x) * (y + x - 2.0 * u.position_m[0]);
            scaled_target(u, consts) * (dt * (eps * t_y).exp() + t_x * (eps * t_x).exp() * (eps * dt).exp_m1())
        })
        .sum()
}

/// Projected gradient descent with Armijo backtracking.
///
/// Each iteration moves along `-L^2 g / f`, the gradient of `log f` in units
/// of `L`, and backtracks from the full step. This makes the iterates
/// invariant to a uniform rescaling of the SNR targets. Sufficient decrease
/// is tested on the cancellation-free difference `f(x + s) - f(x)`, so the
/// search keeps making progress below the rounding level of `f` itself.
pub fn pgd_solve(scenario: &Scenario, options: &PgdOptions) -> Result<SinglePaSolution> {
    if scenario.num_tpas() != 1 {
        return Err(Error::InvalidConfig(format!("the single-PA solver needs N = 1, got N = {}", scenario.num_tpas())));
    }
    let side = scenario.side();
    let (users, consts, layout) = (&scenario.users, &scenario.constants, &scenario.layout);
    let objective = |x: f64| objective_single(x, users, consts, layout);
    let project = |v: f64| v.clamp(0.0, side);
    // Log-gradient scaled to the box.
    let direction = |x: f64, f: f64| side * side * gradient_single(x, users, consts, layout) / f;
    let stationary = |x: f64, d: f64| (x - project(x - d)).abs() <= options.stationarity_tol * side;

    let x0 = project(options.initial_x.unwrap_or(0.5 * side));
    let f0 = objective(x0);
    let mut x = x0;
    let mut f = f0;
    let mut d = direction(x, f);
    // The trace accumulates the accurate differences, so it is exactly
    // nonincreasing.
    let mut f_trace = f0;
    let mut trace = vec![PgdStep { iteration: 0, x, objective_w: f0 }];
    let mut iterations = 0;
    while iterations < options.max_iter && !stationary(x, d) {
        let mut step = 1.0;
        let accepted = loop {
            let candidate = project(x - step * d);
            if candidate == x {
                break None;
            }
            let decrease = objective_difference(x, candidate, users, consts, layout);
            if decrease <= options.armijo * (d * f / (side * side)) * (candidate - x) {
                break Some((candidate, decrease));
            }
            step *= options.shrink;
        };
        let Some((x_next, decrease)) = accepted else {
            break;
        };
        iterations += 1;
        x = x_next;
        f_trace += decrease;
        f = objective(x);
        d = direction(x, f);
        trace.push(PgdStep { iteration: iterations, x, objective_w: f_trace });
    }
    let converged = stationary(x, d);
    // A run that barely moves can evaluate above its start by rounding alone;
    // never report more power than the start point costs.
    if objective(x) > f0 {
        x = x0;
    }
    let powers_w: Vec<f64> = users.iter().map(|u| power_closed_form(x, u, consts, layout)).collect();
    let total_power_w = objective(x);
    Ok(SinglePaSolution { x_star: x, total_power_w, powers_w, trace, converged, iterations })
}
