//! Expected-SNR algebra under independent Bernoulli blockage.
//!
//! For user `m` the expected received power of a beamformer `w` is
//! `w^H A w` with `A = u u^H + diag(v)`, where `u_n = p_n h_n` is the mean
//! channel and `v_n = p_n (1 - p_n) |h_n|^2` its per-link variance.
//!
//! The dominant eigenpair is computed from that diagonal-plus-rank-one
//! structure. With `a_i = |u_i|^2`, every eigenvalue above the diagonal
//! entries solves the secular equation `1 = sum_i a_i / (lambda - v_i)`, and
//! the eigenvector is `v_i = u_i / (lambda - v_i)`. In particular the
//! spectrum depends on `|u_i|` only, never on the channel phases.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{inner, los_channel, los_probability, TpaPositions};
use crate::scenario::{PhysicalConstants, User, WaveguideLayout};
use crate::{Error, Result};

/// Relative eigen-gap below which the dominant eigenvalue is treated as
/// repeated.
pub const DEGENERACY_GAP: f64 = 1e-9;

/// `A = u u^H + diag(v_diag)`, kept in factored form.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedSnrMatrix {
    u: Vec<Complex64>,
    v_diag: Vec<f64>,
}

impl ExpectedSnrMatrix {
    /// Builds the matrix of one user from its LoS gains and LoS probabilities.
    pub fn from_channel(gains: &[Complex64], probs: &[f64]) -> Self {
        assert_eq!(gains.len(), probs.len());
        let u = gains.iter().zip(probs).map(|(h, &p)| h * p).collect();
        let v_diag = gains.iter().zip(probs).map(|(h, &p)| p * (1.0 - p) * h.norm_sqr()).collect();
        Self { u, v_diag }
    }

    pub fn from_parts(u: Vec<Complex64>, v_diag: Vec<f64>) -> Self {
        assert_eq!(u.len(), v_diag.len());
        Self { u, v_diag }
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn u(&self) -> &[Complex64] {
        &self.u
    }

    pub fn v_diag(&self) -> &[f64] {
        &self.v_diag
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.v_diag[i] + self.u[i].norm_sqr()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.diag(i)).sum()
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        let rank_one = self.u[i] * self.u[j].conj();
        if i == j {
            rank_one + self.v_diag[i]
        } else {
            rank_one
        }
    }

    /// Dense row-major copy of `A`, Hermitian by construction.
    pub fn dense(&self) -> Vec<Vec<Complex64>> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            Complex64::new(self.diag(i), 0.0)
                        } else if i < j {
                            self.entry(i, j)
                        } else {
                            self.entry(j, i).conj()
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// `A w` in O(N).
    pub fn apply(&self, w: &[Complex64]) -> Vec<Complex64> {
        let uh_w = inner(&self.u, w);
        self.u.iter().zip(&self.v_diag).zip(w).map(|((u, v), w)| u * uh_w + w * v).collect()
    }

    /// `w^H A w = |u^H w|^2 + sum_i v_i |w_i|^2`.
    pub fn quad_form(&self, w: &[Complex64]) -> f64 {
        inner(&self.u, w).norm_sqr() + self.v_diag.iter().zip(w).map(|(v, w)| v * w.norm_sqr()).sum::<f64>()
    }

    fn weights(&self) -> Vec<f64> {
        self.u.iter().map(|u| u.norm_sqr()).collect()
    }

    pub fn largest_eigenvalue(&self) -> f64 {
        dominant_eigenvalue(&self.weights(), &self.v_diag).value
    }
}

pub fn build_expected_matrix(
    x: &TpaPositions,
    user: &User,
    consts: &PhysicalConstants,
    layout: &WaveguideLayout,
) -> Result<ExpectedSnrMatrix> {
    if x.len() != layout.num_tpas {
        return Err(Error::InvalidConfig(format!("{} positions for {} TPAs", x.len(), layout.num_tpas)));
    }
    matrix_at(x.as_slice(), user, consts, layout)
}

/// [`build_expected_matrix`] without the box check, for finite-difference
/// probes that step just outside `[0, L]`.
pub(crate) fn matrix_at(
    x: &[f64],
    user: &User,
    consts: &PhysicalConstants,
    layout: &WaveguideLayout,
) -> Result<ExpectedSnrMatrix> {
    let (gains, probs) = user_links(x, user, consts, layout)?;
    Ok(ExpectedSnrMatrix::from_channel(&gains, &probs))
}

fn user_links(
    x: &[f64],
    user: &User,
    consts: &PhysicalConstants,
    layout: &WaveguideLayout,
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let mut gains = Vec::with_capacity(x.len());
    let mut probs = Vec::with_capacity(x.len());
    for (n, &x_n) in x.iter().enumerate() {
        gains.push(los_channel(x_n, n, user, consts, layout)?);
        probs.push(los_probability(layout.tpa_point(n, x_n), user.position_m, consts.blockage_density_per_m2));
    }
    Ok((gains, probs))
}

/// Expected SNR of a single TPA at `x` transmitting `power_w` to `user`:
/// `(P eta / sigma^2) exp(-eps t) / t` with `t` the squared TPA-user distance.
pub fn expected_snr_single(
    x: f64,
    power_w: f64,
    user: &User,
    consts: &PhysicalConstants,
    layout: &WaveguideLayout,
) -> f64 {
    let t = crate::channel::squared_distance(layout.tpa_point(0, x), user.position_m);
    power_w * consts.path_gain_const / user.noise_power_w * (-consts.blockage_density_per_m2 * t).exp() / t
}

/// `w^H A w / sigma^2`.
pub fn expected_snr_multi(matrix: &ExpectedSnrMatrix, w: &[Complex64], noise_power_w: f64) -> f64 {
    matrix.quad_form(w) / noise_power_w
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Unit-norm; the first entry above 1e-12 in magnitude is real positive.
    pub vector: Vec<Complex64>,
    /// Distance to the second-largest eigenvalue (infinite for `N = 1`).
    pub gap: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Top {
    /// Root of the secular equation at `v_diag[anchor] + delta`, where
    /// `anchor` is the largest diagonal entry with a nonzero weight.
    Secular { anchor: usize, delta: f64 },
    /// A diagonal entry whose weight is zero dominates.
    Diagonal(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dominant {
    pub value: f64,
    pub top: Top,
}

fn argmax(values: impl Iterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    values.fold(None, |best, (i, v)| match best {
        Some((_, b)) if b >= v => best,
        _ => Some((i, v)),
    })
}

/// Largest eigenvalue of `diag(diag) + z z^H` with `|z_i|^2 = weights[i]`.
pub(crate) fn dominant_eigenvalue(weights: &[f64], diag: &[f64]) -> Dominant {
    let active =
        argmax(weights.iter().zip(diag).enumerate().filter(|(_, (a, _))| **a > 0.0).map(|(i, (_, d))| (i, *d)));
    let inactive =
        argmax(weights.iter().zip(diag).enumerate().filter(|(_, (a, _))| **a <= 0.0).map(|(i, (_, d))| (i, *d)));
    let Some((anchor, d_top)) = active else {
        let (j, d) = inactive.expect("matrix has at least one row");
        return Dominant { value: d, top: Top::Diagonal(j) };
    };
    let delta = secular_top_root(weights, diag, d_top);
    let value = d_top + delta;
    match inactive {
        Some((j, d)) if d > value => Dominant { value: d, top: Top::Diagonal(j) },
        _ => Dominant { value, top: Top::Secular { anchor, delta } },
    }
}

/// Solves `1 = sum_i a_i / (gap_i + delta)` for `delta > 0`, where
/// `gap_i = d_top - d_i >= 0` over the weighted entries.
///
/// The left side minus one is concave and increasing in `delta`, so Newton
/// started from the lower bound `sum_{gap_i = 0} a_i` climbs monotonically;
/// the bracket `[lower, sum_i a_i]` guards against rounding.
fn secular_top_root(weights: &[f64], diag: &[f64], d_top: f64) -> f64 {
    let terms: Vec<(f64, f64)> =
        weights.iter().zip(diag).filter(|(a, _)| **a > 0.0).map(|(a, d)| (*a, d_top - d)).collect();
    let total: f64 = terms.iter().map(|(a, _)| a).sum();
    let mut lo: f64 = terms.iter().filter(|(_, g)| *g == 0.0).map(|(a, _)| a).sum();
    let mut hi = total;
    if lo >= hi {
        return hi;
    }
    let mut delta = lo;
    for _ in 0..200 {
        let (mut f, mut df) = (1.0, 0.0);
        for &(a, g) in &terms {
            let r = a / (g + delta);
            f -= r;
            df += r / (g + delta);
        }
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = delta;
        } else {
            hi = delta;
        }
        let mut next = delta - f / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - delta).abs() <= 4.0 * f64::EPSILON * next || hi - lo <= 4.0 * f64::EPSILON * hi {
            delta = next;
            break;
        }
        delta = next;
    }
    delta
}

/// The secular root just below `d_top`, i.e. in `(d_top - min_gap, d_top)`.
fn secular_second_root(weights: &[f64], diag: &[f64], d_top: f64) -> Option<f64> {
    let mut tied = 0.0;
    let mut others = Vec::new();
    for (&a, &d) in weights.iter().zip(diag) {
        if a <= 0.0 {
            continue;
        }
        let g = d_top - d;
        if g == 0.0 {
            tied += a;
        } else {
            others.push((a, g));
        }
    }
    let min_gap = others.iter().map(|(_, g)| *g).fold(f64::INFINITY, f64::min);
    if !min_gap.is_finite() {
        return None;
    }
    // h(mu) = 1 + tied / mu - sum a / (g - mu) decreases from +inf to -inf on (0, min_gap).
    let (mut lo, mut hi) = (0.0, min_gap);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let h = 1.0 + tied / mid - others.iter().map(|(a, g)| a / (g - mid)).sum::<f64>();
        if h > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(d_top - 0.5 * (lo + hi))
}

fn second_eigenvalue(weights: &[f64], diag: &[f64], dominant: &Dominant) -> Option<f64> {
    let mut candidates: Vec<f64> = Vec::new();
    let active_top =
        argmax(weights.iter().zip(diag).enumerate().filter(|(_, (a, _))| **a > 0.0).map(|(i, (_, d))| (i, *d)));
    if let Some((_, d_top)) = active_top {
        let ties = weights.iter().zip(diag).filter(|(a, d)| **a > 0.0 && **d == d_top).count();
        candidates.extend(std::iter::repeat_n(d_top, ties - 1));
        candidates.extend(secular_second_root(weights, diag, d_top));
        if let Top::Diagonal(_) = dominant.top {
            candidates.push(d_top + secular_top_root(weights, diag, d_top));
        }
    }
    let skip = match dominant.top {
        Top::Diagonal(j) => Some(j),
        Top::Secular { .. } => None,
    };
    candidates.extend(
        weights.iter().zip(diag).enumerate().filter(|(i, (a, _))| **a <= 0.0 && Some(*i) != skip).map(|(_, (_, d))| *d),
    );
    candidates.into_iter().reduce(f64::max)
}

/// Rotates `v` so its first entry above 1e-12 in magnitude is real positive.
pub fn canonical_gauge(v: &mut [Complex64]) {
    if let Some(i) = v.iter().position(|c| c.norm() > 1e-12) {
        let magnitude = v[i].norm();
        let phase = v[i].conj() / magnitude;
        v.iter_mut().for_each(|c| *c *= phase);
        v[i] = Complex64::new(magnitude, 0.0);
    }
}

fn normalize(v: &mut [Complex64]) -> f64 {
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|c| *c /= norm);
    }
    norm
}

/// Dominant eigenpair of `A` via its diagonal-plus-rank-one structure.
pub fn largest_eigenpair(a: &ExpectedSnrMatrix) -> Result<EigenPair> {
    let weights = a.weights();
    let dominant = dominant_eigenvalue(&weights, &a.v_diag);
    let mut vector = match dominant.top {
        Top::Secular { anchor, delta } => {
            let d_top = a.v_diag[anchor];
            a.u.iter()
                .zip(&weights)
                .zip(&a.v_diag)
                .map(|((u, &w), &d)| if w > 0.0 { u / ((d_top - d) + delta) } else { Complex64::new(0.0, 0.0) })
                .collect()
        }
        Top::Diagonal(j) => {
            let mut e = vec![Complex64::new(0.0, 0.0); a.dim()];
            e[j] = Complex64::new(1.0, 0.0);
            e
        }
    };
    if normalize(&mut vector) == 0.0 || !dominant.value.is_finite() {
        return Err(Error::InfeasibleGeometry(dominant.value));
    }
    canonical_gauge(&mut vector);
    let gap = second_eigenvalue(&weights, &a.v_diag, &dominant).map_or(f64::INFINITY, |s| dominant.value - s);
    Ok(EigenPair { value: dominant.value, vector, gap, degenerate: gap < DEGENERACY_GAP * dominant.value })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIterationOptions {
    pub max_iter: usize,
    /// Stop once successive Rayleigh quotients agree to this relative tolerance...
    pub rayleigh_tol: f64,
    /// ...and the residual `|A v - lambda v|` is below this fraction of `trace(A)`.
    pub residual_tol: f64,
}

impl Default for PowerIterationOptions {
    fn default() -> Self {
        Self { max_iter: 100_000, rayleigh_tol: 1e-13, residual_tol: 1e-10 }
    }
}

/// Plain power iteration on `A` using the O(N) structured product.
///
/// Converges at rate `lambda_2 / lambda_1`; kept as an independent route to
/// the dominant pair. The gap is not estimated (`gap` is NaN).
pub fn power_iteration(a: &ExpectedSnrMatrix, options: PowerIterationOptions) -> Result<EigenPair> {
    let n = a.dim();
    let trace = a.trace();
    if trace <= 0.0 {
        return Err(Error::InfeasibleGeometry(trace));
    }
    // Start off any coordinate subspace: uniform plus the mean channel.
    let mut v: Vec<Complex64> =
        a.u.iter().map(|u| Complex64::new(1.0, 0.0) + u / u.norm().max(f64::MIN_POSITIVE)).collect();
    if normalize(&mut v) == 0.0 {
        v = vec![Complex64::new(1.0 / (n as f64).sqrt(), 0.0); n];
    }
    let mut lambda_prev = f64::NAN;
    let mut residual = f64::INFINITY;
    for _ in 0..options.max_iter {
        let av = a.apply(&v);
        let lambda = inner(&v, &av).re;
        residual = av.iter().zip(&v).map(|(x, y)| (x - y * lambda).norm_sqr()).sum::<f64>().sqrt();
        if (lambda - lambda_prev).abs() <= options.rayleigh_tol * lambda && residual <= options.residual_tol * trace {
            canonical_gauge(&mut v);
            return Ok(EigenPair { value: lambda, vector: v, gap: f64::NAN, degenerate: false });
        }
        lambda_prev = lambda;
        v = av;
        if normalize(&mut v) == 0.0 {
            return Err(Error::InfeasibleGeometry(0.0));
        }
    }
    Err(Error::NoConvergence { iterations: options.max_iter, residual })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Sample mean of the instantaneous SNR `|sum_n beta_n conj(h_n) w_n|^2 / sigma^2`
/// over i.i.d. blockage draws.
///
/// Draws come from one ChaCha8 stream of `seed`, `N` uniforms per sample in
/// TPA order. Mean and variance use Welford's update, so a constant sequence
/// gives its value exactly with zero spread.
pub fn monte_carlo_expected_snr(
    gains: &[Complex64],
    probs: &[f64],
    w: &[Complex64],
    noise_power_w: f64,
    num_samples: u64,
    seed: u64,
) -> McEstimate {
    assert!(num_samples >= 1, "at least one sample is required");
    let terms: Vec<Complex64> = gains.iter().zip(w).map(|(h, w)| h.conj() * w).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for k in 1..=num_samples {
        let mut s = Complex64::new(0.0, 0.0);
        for (t, &p) in terms.iter().zip(probs) {
            if rng.gen::<f64>() < p {
                s += t;
            }
        }
        let snr = s.norm_sqr() / noise_power_w;
        let delta = snr - mean;
        mean += delta / k as f64;
        m2 += delta * (snr - mean);
    }
    let std_error =
        if num_samples > 1 { (m2 / (num_samples - 1) as f64).sqrt() / (num_samples as f64).sqrt() } else { 0.0 };
    McEstimate { mean, std_error, samples: num_samples }
}

/// Largest `N` for which [`exact_snr_moments`] enumerates the blockage states.
pub const MAX_ENUMERATED_TPAS: usize = 20;

/// Mean and variance of the instantaneous SNR over all `2^N` blockage states,
/// or `None` above [`MAX_ENUMERATED_TPAS`]. The variance is accumulated
/// around the first-pass mean, so near-certain links do not cancel.
pub fn exact_snr_moments(
    gains: &[Complex64],
    probs: &[f64],
    w: &[Complex64],
    noise_power_w: f64,
) -> Option<(f64, f64)> {
    let n = gains.len();
    if n > MAX_ENUMERATED_TPAS {
        return None;
    }
    let terms: Vec<Complex64> = gains.iter().zip(w).map(|(h, w)| h.conj() * w).collect();
    let states = || {
        (0u32..1 << n).map(|mask| {
            let mut prob = 1.0;
            let mut s = Complex64::new(0.0, 0.0);
            for (i, (t, &p)) in terms.iter().zip(probs).enumerate() {
                if mask >> i & 1 == 1 {
                    prob *= p;
                    s += t;
                } else {
                    prob *= 1.0 - p;
                }
            }
            (prob, s.norm_sqr() / noise_power_w)
        })
    };
    let mean: f64 = states().map(|(p, snr)| p * snr).sum();
    let variance = states().map(|(p, snr)| p * (snr - mean).powi(2)).sum();
    Some((mean, variance))
}

/// Link gains and LoS probabilities of `user` with TPAs at `x`.
pub fn user_channel(
    x: &TpaPositions,
    user: &User,
    consts: &PhysicalConstants,
    layout: &WaveguideLayout,
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    user_links(x.as_slice(), user, consts, layout)
}

/// [`monte_carlo_expected_snr`] for `user` with TPAs at `x`.
pub fn monte_carlo_for_user(
    x: &TpaPositions,
    w: &[Complex64],
    user: &User,
    consts: &PhysicalConstants,
    layout: &WaveguideLayout,
    num_samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    let (gains, probs) = user_links(x.as_slice(), user, consts, layout)?;
    Ok(monte_carlo_expected_snr(&gains, &probs, w, user.noise_power_w, num_samples, seed))
}
