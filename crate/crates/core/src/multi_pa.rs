//! The general multi-antenna problem.
//!
//! For fixed positions `x` each user's beamforming subproblem is solved by
//! the principal eigenvector of `A_m(x)`:
//! `w_m* = sqrt(c_m sigma_m^2 / lambda_max) v_max`. What remains is the
//! positioning problem `min_x f(x) = sum_m c_m sigma_m^2 / lambda_max(A_m(x))`
//! over the box `[0, L]^N`, handled here by projected L-BFGS.
//!
//! The gradient uses first-order eigenvalue perturbation,
//! `d lambda / dx_n = v^H (dA / dx_n) v`, which only touches row and column
//! `n` of `A_m`. Users whose dominant eigenvalue is (nearly) repeated fall
//! back to central differences.

// `!(a > b)` checks below deliberately treat NaN as failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::VecDeque;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{inner, path_phase, squared_distance, TpaPositions};
use crate::expected_snr::{dominant_eigenvalue, largest_eigenpair, matrix_at, ExpectedSnrMatrix};
use crate::scenario::{Scenario, User};
use crate::{Error, Result};

/// Relative step of the central-difference fallback, as a fraction of `L`.
pub const FD_STEP: f64 = 1e-6;

/// `w_m* = sqrt(c_m sigma_m^2 / lambda_max(A)) v_max(A)`.
pub fn optimal_beamformer(matrix: &ExpectedSnrMatrix, user: &User) -> Result<Vec<Complex64>> {
    let pair = largest_eigenpair(matrix)?;
    if !(pair.value > 0.0) {
        return Err(Error::InfeasibleGeometry(pair.value));
    }
    let scale = (user.required_power() / pair.value).sqrt();
    Ok(pair.vector.into_iter().map(|v| v * scale).collect())
}

/// Optimal beamformers of every user at positions `x`.
pub fn optimal_beamformers(x: &TpaPositions, scenario: &Scenario) -> Result<Vec<Vec<Complex64>>> {
    check_dims(x.as_slice(), scenario)?;
    scenario
        .users
        .iter()
        .map(|u| optimal_beamformer(&matrix_at(x.as_slice(), u, &scenario.constants, &scenario.layout)?, u))
        .collect()
}

fn check_dims(x: &[f64], scenario: &Scenario) -> Result<()> {
    if x.len() != scenario.num_tpas() {
        return Err(Error::InvalidConfig(format!("{} positions for {} TPAs", x.len(), scenario.num_tpas())));
    }
    Ok(())
}

/// `|u_n|^2` and `v_n` of one link; only magnitudes enter the spectrum.
pub(crate) fn link_moments(x_n: f64, n: usize, user: &User, scenario: &Scenario) -> (f64, f64) {
    let t = squared_distance(scenario.layout.tpa_point(n, x_n), user.position_m);
    let p = (-scenario.constants.blockage_density_per_m2 * t).exp();
    let gain = scenario.constants.path_gain_const / t;
    (p * p * gain, p * (1.0 - p) * gain)
}

/// `c sigma^2 / lambda_max` from the link moments of one user.
pub(crate) fn power_from_moments(user: &User, weights: &[f64], diag: &[f64]) -> Result<f64> {
    let lambda = dominant_eigenvalue(weights, diag).value;
    if !(lambda > 0.0) {
        return Err(Error::InfeasibleGeometry(lambda));
    }
    Ok(user.required_power() / lambda)
}

/// `c_m sigma_m^2 / lambda_max(A_m(x))` for a single user.
fn user_power(x: &[f64], user: &User, scenario: &Scenario) -> Result<f64> {
    let (w, d): (Vec<f64>, Vec<f64>) =
        x.iter().enumerate().map(|(n, &x_n)| link_moments(x_n, n, user, scenario)).unzip();
    power_from_moments(user, &w, &d)
}

/// The reduced positioning objective `f(x)` in watts.
pub fn objective_multi(x: &[f64], scenario: &Scenario) -> Result<f64> {
    check_dims(x, scenario)?;
    scenario.users.iter().map(|u| user_power(x, u, scenario)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub values: Vec<f64>,
    /// Users whose term was differentiated numerically because the dominant
    /// eigenvalue was flagged degenerate.
    pub fd_fallbacks: usize,
}

/// Analytic `grad f(x)`.
pub fn gradient_multi(x: &[f64], scenario: &Scenario) -> Result<Gradient> {
    check_dims(x, scenario)?;
    let n_tpas = x.len();
    let mut values = vec![0.0; n_tpas];
    let mut fd_fallbacks = 0;
    for user in &scenario.users {
        let term = user_gradient(x, user, scenario)?;
        if term.1 {
            fd_fallbacks += 1;
        }
        values.iter_mut().zip(term.0).for_each(|(g, t)| *g += t);
    }
    Ok(Gradient { values, fd_fallbacks })
}

/// Gradient of one user's power term; the flag reports a numerical fallback.
fn user_gradient(x: &[f64], user: &User, scenario: &Scenario) -> Result<(Vec<f64>, bool)> {
    let consts = &scenario.constants;
    let layout = &scenario.layout;
    let matrix = matrix_at(x, user, consts, layout)?;
    let pair = largest_eigenpair(&matrix)?;
    if pair.degenerate {
        let h = FD_STEP * scenario.side();
        let grad = (0..x.len())
            .map(|n| {
                let mut plus = x.to_vec();
                let mut minus = x.to_vec();
                plus[n] += h;
                minus[n] -= h;
                Ok((user_power(&plus, user, scenario)? - user_power(&minus, user, scenario)?) / (2.0 * h))
            })
            .collect::<Result<Vec<f64>>>()?;
        return Ok((grad, true));
    }

    let eps = consts.blockage_density_per_m2;
    let eta = consts.path_gain_const;
    let two_pi = std::f64::consts::TAU;
    let uh_v = inner(matrix.u(), &pair.vector);
    // d(c sigma^2 / lambda) = -(c sigma^2 / lambda^2) d lambda
    let outer = -user.required_power() / (pair.value * pair.value);
    let [q1, _, _] = user.position_m;
    let grad = x
        .iter()
        .enumerate()
        .map(|(n, &x_n)| {
            let t = squared_distance(layout.tpa_point(n, x_n), user.position_m);
            let d = t.sqrt();
            let dd = (x_n - q1) / d;
            let p = (-eps * t).exp();
            let dp = -2.0 * eps * (x_n - q1) * p;
            let h = Complex64::from_polar(eta.sqrt() / d, path_phase(d, x_n, consts));
            let dh = h * Complex64::new(
                -dd / d,
                -two_pi * (dd / consts.free_space_wavelength_m + 1.0 / consts.waveguide_wavelength_m),
            );
            let du = h * dp + dh * p;
            let dv = eta * (dp * (1.0 - 2.0 * p) / t - p * (1.0 - p) * 2.0 * (x_n - q1) / (t * t));
            let v_n = pair.vector[n];
            let dlambda = 2.0 * (v_n.conj() * du * uh_v).re + v_n.norm_sqr() * dv;
            outer * dlambda
        })
        .collect();
    Ok((grad, false))
}

/// One stored curvature pair `(s, y, rho = 1 / y^T s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePair {
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub rho: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Ring buffer of the most recent curvature pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsBuffer {
    capacity: usize,
    pairs: VecDeque<CurvaturePair>,
}

impl LbfgsBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "L-BFGS memory must be positive");
        Self { capacity, pairs: VecDeque::with_capacity(capacity) }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = &CurvaturePair> {
        self.pairs.iter()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Stores `(s, y)` unless `y^T s <= 1e-12 |y| |s|`; returns whether it
    /// was stored. The oldest pair is evicted when full.
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        if !(sy > 1e-12 * norm(&s) * norm(&y)) {
            return false;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back(CurvaturePair { rho: 1.0 / sy, s, y });
        true
    }

    /// Two-loop recursion: returns `H g` for the implicit inverse-Hessian
    /// approximation `H`, seeded with `H_0 = gamma I`,
    /// `gamma = s^T y / y^T y` of the newest pair (1 when empty).
    pub fn apply_inverse_hessian(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut tau = vec![0.0; self.pairs.len()];
        for (i, pair) in self.pairs.iter().enumerate().rev() {
            tau[i] = pair.rho * dot(&pair.s, &q);
            q.iter_mut().zip(&pair.y).for_each(|(q, y)| *q -= tau[i] * y);
        }
        let gamma = self.pairs.back().map_or(1.0, |p| dot(&p.s, &p.y) / dot(&p.y, &p.y));
        let mut r: Vec<f64> = q.iter().map(|q| gamma * q).collect();
        for (i, pair) in self.pairs.iter().enumerate() {
            let zeta = pair.rho * dot(&pair.y, &r);
            r.iter_mut().zip(&pair.s).for_each(|(r, s)| *r += s * (tau[i] - zeta));
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LbfgsOptions {
    /// Number of stored curvature pairs.
    pub memory: usize,
    pub max_iter: usize,
    /// Stop once `|x - P[x - g]|_inf <= stationarity_tol * L` on the
    /// normalized objective.
    pub stationarity_tol: f64,
    /// Stop once an accepted step lowers the normalized objective by at most
    /// `decrease_tol * (1 + f)`.
    pub decrease_tol: f64,
    pub armijo: f64,
    pub shrink: f64,
    pub min_step: f64,
    /// Extra uniformly random starts on top of the benchmark start.
    pub restarts: usize,
    pub restart_seed: u64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 8,
            max_iter: 500,
            stationarity_tol: 1e-8,
            decrease_tol: 1e-12,
            armijo: 1e-4,
            shrink: 0.5,
            min_step: 1e-14,
            restarts: 0,
            restart_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Stationary,
    SmallDecrease,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective_w: f64,
    pub projected_gradient: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiPaSolution {
    pub x_star: TpaPositions,
    pub beamformers: Vec<Vec<Complex64>>,
    pub total_power_w: f64,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub fd_fallbacks: usize,
    pub start: Vec<f64>,
}

fn projected_gradient_norm(x: &[f64], g: &[f64], side: f64) -> f64 {
    x.iter().zip(g).map(|(x, g)| (x - (x - g).clamp(0.0, side)).abs()).fold(0.0, f64::max)
}

/// Projected L-BFGS from `x0`.
///
/// The objective is normalized by `f(x0)` so the iterates do not depend on
/// the absolute power scale. A step is accepted when the projected point
/// satisfies Armijo along `P[x + t p] - x` and does not raise the raw
/// objective, so the trace never increases. If the quasi-Newton direction
/// fails the line search the memory is dropped and steepest descent retried.
pub fn lbfgs_solve(scenario: &Scenario, options: &LbfgsOptions, x0: &[f64]) -> Result<MultiPaSolution> {
    check_dims(x0, scenario)?;
    let side = scenario.side();
    let project = |x: &[f64]| -> Vec<f64> { x.iter().map(|v| v.clamp(0.0, side)).collect() };
    let mut x = project(x0);
    let start = x.clone();

    let mut raw = objective_multi(&x, scenario)?;
    if !(raw > 0.0 && raw.is_finite()) {
        return Err(Error::InfeasibleGeometry(raw));
    }
    let scale = 1.0 / raw;
    let mut f = raw * scale;
    let grad = gradient_multi(&x, scenario)?;
    let mut fd_fallbacks = grad.fd_fallbacks;
    let mut g: Vec<f64> = grad.values.iter().map(|v| v * scale).collect();
    let mut buffer = LbfgsBuffer::new(options.memory);

    let mut pg = projected_gradient_norm(&x, &g, side);
    let mut trace = vec![IterationRecord { iteration: 0, objective_w: raw, projected_gradient: pg, step: 0.0 }];
    let mut iterations = 0;
    let termination = loop {
        if pg <= options.stationarity_tol * side {
            break Termination::Stationary;
        }
        if iterations >= options.max_iter {
            break Termination::MaxIterations;
        }

        let mut direction: Vec<f64> = buffer.apply_inverse_hessian(&g).iter().map(|r| -r).collect();
        if !(dot(&direction, &g) < 0.0) {
            buffer.clear();
            direction = g.iter().map(|v| -v).collect();
        }
        let mut accepted = line_search(scenario, options, &x, f, raw, scale, &g, &direction)?;
        if accepted.is_none() && !buffer.is_empty() {
            buffer.clear();
            direction = g.iter().map(|v| -v).collect();
            accepted = line_search(scenario, options, &x, f, raw, scale, &g, &direction)?;
        }
        let Some(step) = accepted else {
            break Termination::LineSearchFailed;
        };

        let grad = gradient_multi(&step.x, scenario)?;
        fd_fallbacks += grad.fd_fallbacks;
        let g_next: Vec<f64> = grad.values.iter().map(|v| v * scale).collect();
        let s: Vec<f64> = step.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_next.iter().zip(&g).map(|(a, b)| a - b).collect();
        buffer.push(s, y);

        let decrease = f - step.f;
        x = step.x;
        f = step.f;
        raw = step.raw;
        g = g_next;
        iterations += 1;
        pg = projected_gradient_norm(&x, &g, side);
        trace.push(IterationRecord { iteration: iterations, objective_w: raw, projected_gradient: pg, step: step.t });
        if decrease <= options.decrease_tol * (1.0 + f) {
            break if pg <= options.stationarity_tol * side {
                Termination::Stationary
            } else {
                Termination::SmallDecrease
            };
        }
    };

    let x_star = TpaPositions::new(x, side)?;
    let beamformers = optimal_beamformers(&x_star, scenario)?;
    Ok(MultiPaSolution {
        x_star,
        beamformers,
        total_power_w: raw,
        trace,
        converged: matches!(termination, Termination::Stationary | Termination::SmallDecrease),
        termination,
        iterations,
        fd_fallbacks,
        start,
    })
}

struct AcceptedStep {
    x: Vec<f64>,
    f: f64,
    raw: f64,
    t: f64,
}

#[allow(clippy::too_many_arguments)]
fn line_search(
    scenario: &Scenario,
    options: &LbfgsOptions,
    x: &[f64],
    f: f64,
    raw: f64,
    scale: f64,
    g: &[f64],
    direction: &[f64],
) -> Result<Option<AcceptedStep>> {
    let side = scenario.side();
    let mut t = 1.0;
    while t >= options.min_step {
        let candidate: Vec<f64> = x.iter().zip(direction).map(|(x, p)| (x + t * p).clamp(0.0, side)).collect();
        let moved: Vec<f64> = candidate.iter().zip(x).map(|(a, b)| a - b).collect();
        let slope = dot(g, &moved);
        if slope < 0.0 {
            let raw_candidate = objective_multi(&candidate, scenario)?;
            let f_candidate = raw_candidate * scale;
            if f_candidate <= f + options.armijo * slope && raw_candidate <= raw {
                return Ok(Some(AcceptedStep { x: candidate, f: f_candidate, raw: raw_candidate, t }));
            }
        }
        t *= options.shrink;
    }
    Ok(None)
}

/// L-BFGS from the fixed-antenna benchmark start plus `options.restarts`
/// uniformly random starts; the lowest-power run wins, earlier runs on ties.
pub fn solve_multi_start(scenario: &Scenario, options: &LbfgsOptions) -> Result<MultiPaSolution> {
    let mut starts = vec![scenario.layout.center_positions()];
    let mut rng = ChaCha8Rng::seed_from_u64(options.restart_seed);
    for _ in 0..options.restarts {
        starts.push((0..scenario.num_tpas()).map(|_| rng.gen::<f64>() * scenario.side()).collect());
    }
    let runs: Vec<MultiPaSolution> =
        starts.par_iter().map(|x0| lbfgs_solve(scenario, options, x0)).collect::<Result<_>>()?;
    Ok(runs
        .into_iter()
        .reduce(|best, run| if run.total_power_w < best.total_power_w { run } else { best })
        .expect("at least the benchmark start"))
}
