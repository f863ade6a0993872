//! Problem instances: physical constants, waveguide layout, users and the
//! TOML configuration they are built from.
//!
//! All randomness is drawn from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded
//! through `SeedableRng::seed_from_u64`, so a seed reproduces the same users
//! on every platform.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT_M_S: f64 = 2.997_924_58e8;

/// Carrier-dependent constants of the LoS channel model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConstants {
    pub carrier_frequency_hz: f64,
    pub refractive_index: f64,
    pub speed_of_light_m_s: f64,
    pub free_space_wavelength_m: f64,
    pub waveguide_wavelength_m: f64,
    /// `eta = (lambda / 4 pi)^2`, in m^2.
    pub path_gain_const: f64,
    pub blockage_density_per_m2: f64,
}

impl PhysicalConstants {
    pub fn derive(carrier_frequency_hz: f64, refractive_index: f64, blockage_density: f64) -> Result<Self> {
        if !(carrier_frequency_hz > 0.0 && carrier_frequency_hz.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "carrier frequency must be positive, got {carrier_frequency_hz}"
            )));
        }
        if !(refractive_index >= 1.0 && refractive_index.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "effective refractive index must be >= 1, got {refractive_index}"
            )));
        }
        if !(blockage_density >= 0.0 && blockage_density.is_finite()) {
            return Err(Error::InvalidConfig(format!("blockage density must be >= 0, got {blockage_density}")));
        }
        let lambda = SPEED_OF_LIGHT_M_S / carrier_frequency_hz;
        Ok(Self {
            carrier_frequency_hz,
            refractive_index,
            speed_of_light_m_s: SPEED_OF_LIGHT_M_S,
            free_space_wavelength_m: lambda,
            waveguide_wavelength_m: lambda / refractive_index,
            path_gain_const: (lambda / (4.0 * std::f64::consts::PI)).powi(2),
            blockage_density_per_m2: blockage_density,
        })
    }

    pub fn with_blockage_density(&self, blockage_density: f64) -> Result<Self> {
        Self::derive(self.carrier_frequency_hz, self.refractive_index, blockage_density)
    }
}

/// `N` waveguides parallel to the x-axis, evenly spaced across the region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveguideLayout {
    pub num_tpas: usize,
    pub region_side_m: f64,
    pub height_m: f64,
    pub waveguide_y_m: Vec<f64>,
}

impl WaveguideLayout {
    pub fn build(num_tpas: usize, region_side_m: f64, height_m: f64) -> Result<Self> {
        if num_tpas == 0 {
            return Err(Error::InvalidConfig("at least one waveguide is required".into()));
        }
        if !(region_side_m > 0.0 && region_side_m.is_finite()) {
            return Err(Error::InvalidConfig(format!("region side must be positive, got {region_side_m}")));
        }
        if !(height_m > 0.0 && height_m.is_finite()) {
            return Err(Error::InvalidConfig(format!("waveguide height must be positive, got {height_m}")));
        }
        // -L/2 + (n + 1/2) L/N written with an integer numerator so mirrored
        // waveguides get bitwise-opposite coordinates.
        let n_f = num_tpas as f64;
        let waveguide_y_m = (0..num_tpas).map(|n| ((2 * n + 1) as f64 - n_f) * region_side_m / (2.0 * n_f)).collect();
        Ok(Self { num_tpas, region_side_m, height_m, waveguide_y_m })
    }

    pub fn feed_point(&self, n: usize) -> [f64; 3] {
        [0.0, self.waveguide_y_m[n], self.height_m]
    }

    pub fn tpa_point(&self, n: usize, x: f64) -> [f64; 3] {
        [x, self.waveguide_y_m[n], self.height_m]
    }

    /// The fixed-antenna benchmark position: every TPA at the waveguide centre.
    pub fn center_positions(&self) -> Vec<f64> {
        vec![0.5 * self.region_side_m; self.num_tpas]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct User {
    pub position_m: [f64; 3],
    pub snr_target_linear: f64,
    pub noise_power_w: f64,
}

impl User {
    /// The target scaled by noise, `c_m * sigma_m^2`: the received power the
    /// beamformer has to deliver in expectation.
    pub fn required_power(&self) -> f64 {
        self.snr_target_linear * self.noise_power_w
    }
}

/// An immutable problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub constants: PhysicalConstants,
    pub layout: WaveguideLayout,
    pub users: Vec<User>,
    pub rng_seed: u64,
}

impl Scenario {
    pub fn new(constants: PhysicalConstants, layout: WaveguideLayout, users: Vec<User>, rng_seed: u64) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::InvalidConfig("at least one user is required".into()));
        }
        let side = layout.region_side_m;
        for (m, user) in users.iter().enumerate() {
            let [q1, q2, q3] = user.position_m;
            if !(0.0..=side).contains(&q1) || !(-0.5 * side..=0.5 * side).contains(&q2) || q3 != 0.0 {
                return Err(Error::InvalidConfig(format!("user {m} at ({q1}, {q2}, {q3}) lies outside the region")));
            }
            if !(user.snr_target_linear > 0.0 && user.snr_target_linear.is_finite()) {
                return Err(Error::InvalidConfig(format!("user {m}: SNR target must be positive")));
            }
            if !(user.noise_power_w > 0.0 && user.noise_power_w.is_finite()) {
                return Err(Error::InvalidConfig(format!("user {m}: noise power must be positive")));
            }
        }
        Ok(Self { constants, layout, users, rng_seed })
    }

    pub fn num_tpas(&self) -> usize {
        self.layout.num_tpas
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn side(&self) -> f64 {
        self.layout.region_side_m
    }

    /// Same geometry and users with every SNR target multiplied by `factor`.
    pub fn with_scaled_targets(&self, factor: f64) -> Result<Self> {
        let users = self.users.iter().map(|u| User { snr_target_linear: u.snr_target_linear * factor, ..*u }).collect();
        Scenario::new(self.constants, self.layout.clone(), users, self.rng_seed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let parsed: Scenario =
            serde_json::from_str(s).map_err(|e| Error::InvalidConfig(format!("scenario json: {e}")))?;
        Scenario::new(parsed.constants, parsed.layout, parsed.users, parsed.rng_seed)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Power in dBm, `10 log10(P / 1 mW)`.
pub fn watts_to_dbm(p: f64) -> f64 {
    10.0 * (p / 1e-3).log10()
}

/// A scalar shared by every user or one value per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerUser {
    Uniform(f64),
    List(Vec<f64>),
}

impl PerUser {
    pub fn get(&self, m: usize) -> f64 {
        match self {
            PerUser::Uniform(v) => *v,
            PerUser::List(vs) => vs[m],
        }
    }

    fn check_len(&self, name: &str, count: usize) -> Result<()> {
        match self {
            PerUser::List(vs) if vs.len() != count => {
                Err(Error::InvalidConfig(format!("{name} lists {} values for {count} users", vs.len())))
            }
            _ => Ok(()),
        }
    }
}

/// Draws `count` users i.i.d. uniform over `[0, L] x [-L/2, L/2]` on the floor.
///
/// Each user consumes two consecutive uniforms from the seeded stream
/// (first `q1`, then `q2`), so the first `k` users do not depend on `count`.
pub fn sample_users(
    count: usize,
    side_m: f64,
    snr_targets_linear: &PerUser,
    noise_power_w: &PerUser,
    seed: u64,
) -> Result<Vec<User>> {
    if count == 0 {
        return Err(Error::InvalidConfig("at least one user is required".into()));
    }
    snr_targets_linear.check_len("snr targets", count)?;
    noise_power_w.check_len("noise powers", count)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|m| {
            let q1 = side_m * rng.gen::<f64>();
            let q2 = side_m * (rng.gen::<f64>() - 0.5);
            User {
                position_m: [q1, q2, 0.0],
                snr_target_linear: snr_targets_linear.get(m),
                noise_power_w: noise_power_w.get(m),
            }
        })
        .collect())
}

/// The on-disk configuration. Missing keys take the simulation defaults
/// (28 GHz, n_e = 1.4, L = 20 m, d_z = 10 m, 20 dB, 1e-14 W); unknown keys
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub f_c_hz: f64,
    pub n_e: f64,
    pub epsilon: f64,
    #[serde(rename = "N")]
    pub num_tpas: usize,
    #[serde(rename = "M")]
    pub num_users: usize,
    #[serde(rename = "L_m")]
    pub side_m: f64,
    pub d_z_m: f64,
    pub snr_target_db: PerUser,
    pub noise_power_w: PerUser,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            f_c_hz: 28e9,
            n_e: 1.4,
            epsilon: 0.05,
            num_tpas: 4,
            num_users: 10,
            side_m: 20.0,
            d_z_m: 10.0,
            snr_target_db: PerUser::Uniform(20.0),
            noise_power_w: PerUser::Uniform(1e-14),
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Builds the scenario, drawing user positions from `seed`.
    pub fn build(&self) -> Result<Scenario> {
        let constants = PhysicalConstants::derive(self.f_c_hz, self.n_e, self.epsilon)?;
        let layout = WaveguideLayout::build(self.num_tpas, self.side_m, self.d_z_m)?;
        let targets = match &self.snr_target_db {
            PerUser::Uniform(db) => PerUser::Uniform(db_to_linear(*db)),
            PerUser::List(dbs) => PerUser::List(dbs.iter().copied().map(db_to_linear).collect()),
        };
        let users = sample_users(self.num_users, self.side_m, &targets, &self.noise_power_w, self.seed)?;
        Scenario::new(constants, layout, users, self.seed)
    }
}
