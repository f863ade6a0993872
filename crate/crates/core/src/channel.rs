//! Spherical-wave LoS channel, blockage probabilities and Bernoulli blockage
//! draws.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scenario::{PhysicalConstants, Scenario, User, WaveguideLayout};
use crate::{Error, Result};

/// Along-waveguide TPA coordinates, one per waveguide, each in `[0, L]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TpaPositions(Vec<f64>);

impl TpaPositions {
    pub fn new(x: Vec<f64>, side_m: f64) -> Result<Self> {
        if let Some((n, v)) = x.iter().enumerate().find(|(_, v)| !(0.0..=side_m).contains(*v)) {
            return Err(Error::InvalidConfig(format!("TPA {n} at x = {v} is outside [0, {side_m}]")));
        }
        Ok(Self(x))
    }

    /// Componentwise clamp onto `[0, L]^N`.
    pub fn projected(x: &[f64], side_m: f64) -> Self {
        Self(x.iter().map(|v| v.clamp(0.0, side_m)).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

pub(crate) fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    squared_distance(a, b).sqrt()
}

pub(crate) fn squared_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// `exp(-eps * |tpa - user|^2)`.
pub fn los_probability(tpa: [f64; 3], user: [f64; 3], blockage_density: f64) -> f64 {
    (-blockage_density * squared_distance(tpa, user)).exp()
}

/// Phase of the LoS gain in radians, reduced to `(-2 pi, 0]`.
///
/// Free-space and in-waveguide path lengths are converted to cycles and
/// reduced separately before summing; at 28 GHz a 20 m path is ~2e3 cycles,
/// so the reduction costs ~1e-13 of a cycle.
pub fn path_phase(free_space_m: f64, in_guide_m: f64, consts: &PhysicalConstants) -> f64 {
    let cycles = (free_space_m / consts.free_space_wavelength_m).rem_euclid(1.0)
        + (in_guide_m / consts.waveguide_wavelength_m).rem_euclid(1.0);
    -TAU * cycles.rem_euclid(1.0)
}

/// LoS gain `h^L_nm` of TPA `n` at `x_n` towards `user`.
///
/// The TPA sits at `x_n` on its waveguide, so the in-guide path from the feed
/// point is exactly `x_n`.
pub fn los_channel(
    x_n: f64,
    n: usize,
    user: &User,
    consts: &PhysicalConstants,
    layout: &WaveguideLayout,
) -> Result<Complex64> {
    let d = distance(layout.tpa_point(n, x_n), user.position_m);
    if d == 0.0 {
        return Err(Error::SingularGeometry { tpa: n });
    }
    let phase = path_phase(d, x_n, consts);
    Ok(Complex64::from_polar(consts.path_gain_const.sqrt() / d, phase))
}

/// LoS gains and LoS probabilities for every TPA-user pair, stored row-major
/// by TPA (`n * M + m`).
#[derive(Debug, Clone, PartialEq)]
pub struct LosChannelMatrix {
    num_tpas: usize,
    num_users: usize,
    gains: Vec<Complex64>,
    probs: Vec<f64>,
}

impl LosChannelMatrix {
    pub fn num_tpas(&self) -> usize {
        self.num_tpas
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn gain(&self, n: usize, m: usize) -> Complex64 {
        self.gains[n * self.num_users + m]
    }

    pub fn prob(&self, n: usize, m: usize) -> f64 {
        self.probs[n * self.num_users + m]
    }

    /// `h_m(x)`: the LoS gains from all TPAs to user `m`.
    pub fn column(&self, m: usize) -> Vec<Complex64> {
        (0..self.num_tpas).map(|n| self.gain(n, m)).collect()
    }

    pub fn prob_column(&self, m: usize) -> Vec<f64> {
        (0..self.num_tpas).map(|n| self.prob(n, m)).collect()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

pub fn channel_matrix(x: &TpaPositions, scenario: &Scenario) -> Result<LosChannelMatrix> {
    let num_tpas = scenario.num_tpas();
    let num_users = scenario.num_users();
    if x.len() != num_tpas {
        return Err(Error::InvalidConfig(format!("{} positions for {num_tpas} TPAs", x.len())));
    }
    let eps = scenario.constants.blockage_density_per_m2;
    let mut gains = Vec::with_capacity(num_tpas * num_users);
    let mut probs = Vec::with_capacity(num_tpas * num_users);
    for (n, &x_n) in x.as_slice().iter().enumerate() {
        let tpa = scenario.layout.tpa_point(n, x_n);
        for user in &scenario.users {
            let h = los_channel(x_n, n, user, &scenario.constants, &scenario.layout)?;
            gains.push(h);
            probs.push(los_probability(tpa, user.position_m, eps));
        }
    }
    Ok(LosChannelMatrix { num_tpas, num_users, gains, probs })
}

/// One realization of the link-existence indicators `beta_nm`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockageSample {
    num_users: usize,
    beta: Vec<u8>,
}

impl BlockageSample {
    pub fn get(&self, n: usize, m: usize) -> u8 {
        self.beta[n * self.num_users + m]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.beta
    }
}

/// Draws independent `beta_nm ~ Bernoulli(p_nm)`.
///
/// Sample `k` reads ChaCha8 stream `k` of `seed`, one uniform per link in
/// row-major order, so any sample can be regenerated on its own.
pub fn sample_blockage(probs: &[f64], num_users: usize, seed: u64, sample_index: u64) -> BlockageSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_index);
    let beta = probs.iter().map(|&p| u8::from(rng.gen::<f64>() < p)).collect();
    BlockageSample { num_users, beta }
}

/// `|h^H w|^2 / sigma^2`.
pub fn instantaneous_snr(h: &[Complex64], w: &[Complex64], noise_power_w: f64) -> f64 {
    inner(h, w).norm_sqr() / noise_power_w
}

/// `a^H b`.
pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::derive(28e9, 1.4, 0.05).unwrap()
    }

    fn user_at(q1: f64, q2: f64) -> User {
        User { position_m: [q1, q2, 0.0], snr_target_linear: 100.0, noise_power_w: 1e-14 }
    }

    #[test]
    fn probability_examples() {
        let p = [1.0, 2.0, 3.0];
        assert_eq!(los_probability(p, p, 0.7), 1.0);
        assert_eq!(los_probability([0.0, 0.0, 10.0], [3.0, 4.0, 0.0], 0.0), 1.0);
        let q = los_probability([0.0, 0.0, 10.0], [0.0, 0.0, 0.0], 0.05);
        assert!((q - 6.7379e-3).abs() < 1e-7);
    }

    #[test]
    fn probability_decreases_with_distance() {
        let tpa = [5.0, 0.0, 10.0];
        let mut last = f64::INFINITY;
        for k in 0..50 {
            let p = los_probability(tpa, [5.0 + 0.3 * k as f64, 1.0, 0.0], 0.02);
            assert!(p < last && p > 0.0);
            last = p;
        }
    }

    #[test]
    fn gain_magnitude_law() {
        let c = consts();
        let layout = WaveguideLayout::build(3, 20.0, 10.0).unwrap();
        let user = user_at(4.0, 3.0);
        for (n, x) in [(0, 0.0), (1, 7.3), (2, 19.9)] {
            let h = los_channel(x, n, &user, &c, &layout).unwrap();
            let d = distance(layout.tpa_point(n, x), user.position_m);
            assert!((h.norm() * d - c.path_gain_const.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn feed_point_contributes_no_guide_phase() {
        let c = consts();
        let layout = WaveguideLayout::build(1, 20.0, 10.0).unwrap();
        let user = user_at(6.0, 2.0);
        let h = los_channel(0.0, 0, &user, &c, &layout).unwrap();
        let d = distance(layout.tpa_point(0, 0.0), user.position_m);
        let expect = -TAU * (d / c.free_space_wavelength_m).rem_euclid(1.0);
        let diff = (h.arg() - expect).rem_euclid(TAU);
        assert!(diff.min(TAU - diff) < 1e-12);
    }

    #[test]
    fn equidistant_users_see_equal_gains() {
        let c = consts();
        let layout = WaveguideLayout::build(1, 20.0, 10.0).unwrap();
        let a = los_channel(8.0, 0, &user_at(5.0, 2.0), &c, &layout).unwrap();
        let b = los_channel(8.0, 0, &user_at(11.0, -2.0), &c, &layout).unwrap();
        assert!((a - b).norm() < 1e-18);
    }

    #[test]
    fn phase_reduced_vs_unreduced() {
        let c = consts();
        let layout = WaveguideLayout::build(2, 20.0, 10.0).unwrap();
        let user = user_at(13.0, 4.0);
        for k in 0..200 {
            let x = 0.1 * k as f64;
            let h = los_channel(x, 1, &user, &c, &layout).unwrap();
            let d = distance(layout.tpa_point(1, x), user.position_m);
            let unreduced = -TAU * (d / c.free_space_wavelength_m + x / c.waveguide_wavelength_m);
            let diff = (h.arg() - unreduced).rem_euclid(TAU);
            assert!(diff.min(TAU - diff) < 1e-9, "x = {x}: {diff}");
        }
    }

    #[test]
    fn singular_geometry_is_reported() {
        let c = consts();
        let layout = WaveguideLayout { num_tpas: 1, region_side_m: 20.0, height_m: 0.0, waveguide_y_m: vec![0.0] };
        assert!(matches!(los_channel(3.0, 0, &user_at(3.0, 0.0), &c, &layout), Err(Error::SingularGeometry { .. })));
    }

    fn scenario(n: usize, m: usize, seed: u64) -> Scenario {
        ScenarioConfig { num_tpas: n, num_users: m, seed, ..Default::default() }.build().unwrap()
    }

    #[test]
    fn matrix_entries_match_raw_formula() {
        let sc = scenario(3, 4, 9);
        let x = TpaPositions::new(vec![2.0, 11.5, 17.25], 20.0).unwrap();
        let h = channel_matrix(&x, &sc).unwrap();
        let c = &sc.constants;
        for n in 0..3 {
            for m in 0..4 {
                let q = sc.users[m].position_m;
                let psi = [x.as_slice()[n], sc.layout.waveguide_y_m[n], 10.0];
                let d = ((psi[0] - q[0]).powi(2) + (psi[1] - q[1]).powi(2) + 100.0).sqrt();
                let phase = -TAU * (d / c.free_space_wavelength_m + psi[0] / c.waveguide_wavelength_m);
                let expect = Complex64::from_polar(c.path_gain_const.sqrt() / d, phase);
                assert!((h.gain(n, m) - expect).norm() <= 1e-9 * expect.norm());
                assert!((h.prob(n, m) - (-0.05 * d * d).exp()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_tpa_column_is_scalar_channel() {
        let sc = scenario(1, 3, 2);
        let x = TpaPositions::new(vec![4.0], 20.0).unwrap();
        let h = channel_matrix(&x, &sc).unwrap();
        for m in 0..3 {
            let direct = los_channel(4.0, 0, &sc.users[m], &sc.constants, &sc.layout).unwrap();
            assert_eq!(h.column(m), vec![direct]);
        }
    }

    #[test]
    fn permuting_users_permutes_columns() {
        let sc = scenario(2, 3, 4);
        let mut swapped = sc.clone();
        swapped.users.swap(0, 2);
        let x = TpaPositions::new(vec![3.0, 14.0], 20.0).unwrap();
        let a = channel_matrix(&x, &sc).unwrap();
        let b = channel_matrix(&x, &swapped).unwrap();
        assert_eq!(a.column(0), b.column(2));
        assert_eq!(a.column(2), b.column(0));
        assert_eq!(a.column(1), b.column(1));
    }

    #[test]
    fn positions_are_validated() {
        assert!(TpaPositions::new(vec![-0.1], 20.0).is_err());
        assert!(TpaPositions::new(vec![20.1], 20.0).is_err());
        assert_eq!(TpaPositions::projected(&[-1.0, 5.0, 30.0], 20.0).as_slice(), &[0.0, 5.0, 20.0]);
        let sc = scenario(2, 1, 0);
        let bad = TpaPositions::new(vec![1.0], 20.0).unwrap();
        assert!(channel_matrix(&bad, &sc).is_err());
    }

    #[test]
    fn blockage_extremes_and_reproducibility() {
        assert!(sample_blockage(&[1.0; 6], 3, 1, 0).as_slice().iter().all(|&b| b == 1));
        assert!(sample_blockage(&[0.0; 6], 3, 1, 0).as_slice().iter().all(|&b| b == 0));
        let probs = [0.2, 0.5, 0.9, 0.4];
        assert_eq!(sample_blockage(&probs, 2, 42, 17), sample_blockage(&probs, 2, 42, 17));
        let s = sample_blockage(&probs, 2, 42, 17);
        assert!(s.get(1, 1) <= 1);
    }

    #[test]
    fn blockage_frequency_matches_probability() {
        let probs = [0.3; 10];
        let samples = 100_000u64;
        let ones: u64 = (0..samples)
            .map(|k| sample_blockage(&probs, 10, 5, k).as_slice().iter().map(|&b| b as u64).sum::<u64>())
            .sum();
        let draws = (samples * 10) as f64;
        let mean = ones as f64 / draws;
        assert!((mean - 0.3).abs() <= 3.0 * (0.3f64 * 0.7 / draws).sqrt(), "mean {mean}");
    }

    #[test]
    fn snr_examples() {
        let h = [Complex64::new(0.3, -0.2), Complex64::new(-1.0, 0.5)];
        assert_eq!(instantaneous_snr(&h, &[Complex64::new(0.0, 0.0); 2], 1.0), 0.0);

        let eta: f64 = 7.26e-7;
        let d = 12.0;
        for theta in [0.0, 1.0, 2.5, -3.0] {
            let h = [Complex64::from_polar(eta.sqrt() / d, theta)];
            let w = [Complex64::from_polar(2.0f64.sqrt(), 0.7)];
            let snr = instantaneous_snr(&h, &w, 1e-14);
            let expect = 2.0 * eta / (d * d * 1e-14);
            assert!((snr - expect).abs() <= 1e-12 * expect);
        }

        let w = [Complex64::new(0.1, 0.9), Complex64::new(2.0, -1.0)];
        let re = h[0].re * w[0].re + h[0].im * w[0].im + h[1].re * w[1].re + h[1].im * w[1].im;
        let im = h[0].re * w[0].im - h[0].im * w[0].re + h[1].re * w[1].im - h[1].im * w[1].re;
        let expect = (re * re + im * im) / 0.5;
        assert!((instantaneous_snr(&h, &w, 0.5) - expect).abs() < 1e-12);
    }
}
