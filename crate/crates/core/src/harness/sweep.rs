use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{solve, solve_benchmark, SolveOptions};
use crate::scenario::{watts_to_dbm, PerUser, ScenarioConfig};
use crate::{Error, Result};

/// Shared sweep inputs. Seed `i` of a sweep point draws its users from
/// `base.seed + i`, so the user drop is the same at every swept value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSettings {
    pub base: ScenarioConfig,
    pub seeds: usize,
    pub solve: SolveOptions,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { base: ScenarioConfig::default(), seeds: 20, solve: SolveOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Benchmark,
    Proposed,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub seed: u64,
    pub method: Method,
    #[serde(rename = "N")]
    pub num_tpas: usize,
    #[serde(rename = "M")]
    pub num_users: usize,
    pub epsilon: f64,
    pub snr_target_db: f64,
    pub power_w: f64,
    pub power_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    /// `epsilon`, `snr_target_db` or `num_users`.
    pub parameter: String,
    pub values: Vec<f64>,
    /// Ordered by value, then series, then seed, benchmark before proposed.
    pub rows: Vec<SweepRow>,
    pub num_seeds: usize,
    /// SHA-256 of the sweep definition.
    pub digest: String,
}

/// Mean over seeds of one (value, N, M, method) group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepAggregate {
    pub param: f64,
    pub num_tpas: usize,
    pub num_users: usize,
    pub method: Method,
    pub mean_power_dbm: f64,
}

impl SweepResult {
    pub fn aggregate(&self) -> Vec<SweepAggregate> {
        let mut out: Vec<(SweepAggregate, usize)> = Vec::new();
        for row in &self.rows {
            let key = (row.param, row.num_tpas, row.num_users, row.method);
            match out.iter_mut().find(|(a, _)| (a.param, a.num_tpas, a.num_users, a.method) == key) {
                Some((a, count)) => {
                    a.mean_power_dbm += row.power_dbm;
                    *count += 1;
                }
                None => out.push((
                    SweepAggregate {
                        param: row.param,
                        num_tpas: row.num_tpas,
                        num_users: row.num_users,
                        method: row.method,
                        mean_power_dbm: row.power_dbm,
                    },
                    1,
                )),
            }
        }
        out.into_iter()
            .map(|(mut a, count)| {
                a.mean_power_dbm /= count as f64;
                a
            })
            .collect()
    }

    /// Mean power in dBm of `method` with `num_tpas` antennas at `param`.
    pub fn mean_dbm(&self, param: f64, num_tpas: usize, method: Method) -> Option<f64> {
        let powers: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.param == param && r.num_tpas == num_tpas && r.method == method)
            .map(|r| r.power_dbm)
            .collect();
        (!powers.is_empty()).then(|| powers.iter().sum::<f64>() / powers.len() as f64)
    }

    /// Mean benchmark-minus-proposed power in dB.
    pub fn mean_saving_db(&self, param: f64, num_tpas: usize) -> Option<f64> {
        Some(self.mean_dbm(param, num_tpas, Method::Benchmark)? - self.mean_dbm(param, num_tpas, Method::Proposed)?)
    }

    /// Distinct antenna counts in row order.
    pub fn tpa_counts(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.num_tpas) {
                out.push(r.num_tpas);
            }
        }
        out
    }
}

fn uniform_target_db(config: &ScenarioConfig) -> Result<f64> {
    match config.snr_target_db {
        PerUser::Uniform(db) => Ok(db),
        PerUser::List(_) => Err(Error::InvalidConfig("sweeps need a uniform snr_target_db".into())),
    }
}

fn run_sweep(
    parameter: &str,
    values: &[f64],
    points: Vec<(f64, ScenarioConfig)>,
    settings: &SweepSettings,
) -> Result<SweepResult> {
    if settings.seeds == 0 {
        return Err(Error::InvalidConfig("a sweep needs at least one seed".into()));
    }
    if values.is_empty() {
        return Err(Error::InvalidConfig(format!("no {parameter} values to sweep")));
    }
    let jobs: Vec<(f64, ScenarioConfig)> = points
        .into_iter()
        .flat_map(|(param, config)| {
            (0..settings.seeds as u64).map(move |i| (param, ScenarioConfig { seed: config.seed + i, ..config.clone() }))
        })
        .collect();
    let rows: Vec<[SweepRow; 2]> = jobs
        .par_iter()
        .map(|(param, config)| {
            let scenario = config.build()?;
            let benchmark = solve_benchmark(&scenario)?;
            let proposed = solve(&scenario, &settings.solve)?;
            let row = |method, power_w: f64| -> Result<SweepRow> {
                Ok(SweepRow {
                    param: *param,
                    seed: config.seed,
                    method,
                    num_tpas: config.num_tpas,
                    num_users: config.num_users,
                    epsilon: config.epsilon,
                    snr_target_db: uniform_target_db(config)?,
                    power_w,
                    power_dbm: watts_to_dbm(power_w),
                })
            };
            Ok([row(Method::Benchmark, benchmark.total_power_w)?, row(Method::Proposed, proposed.total_power_w)?])
        })
        .collect::<Result<_>>()?;

    #[derive(Serialize)]
    struct Definition<'a> {
        parameter: &'a str,
        values: &'a [f64],
        jobs: &'a [(f64, ScenarioConfig)],
        solve: &'a SolveOptions,
    }
    let definition = serde_json::to_vec(&Definition { parameter, values, jobs: &jobs, solve: &settings.solve })
        .expect("sweep definition serializes");
    let digest = Sha256::digest(&definition).iter().map(|b| format!("{b:02x}")).collect();

    Ok(SweepResult {
        parameter: parameter.to_string(),
        values: values.to_vec(),
        rows: rows.into_iter().flatten().collect(),
        num_seeds: settings.seeds,
        digest,
    })
}

/// Power versus blockage density, one series per antenna count.
pub fn sweep_epsilon(epsilons: &[f64], tpa_counts: &[usize], settings: &SweepSettings) -> Result<SweepResult> {
    uniform_target_db(&settings.base)?;
    let points = epsilons
        .iter()
        .flat_map(|&eps| {
            tpa_counts
                .iter()
                .map(move |&n| (eps, ScenarioConfig { epsilon: eps, num_tpas: n, ..settings.base.clone() }))
        })
        .collect();
    run_sweep("epsilon", epsilons, points, settings)
}

/// Power versus the (uniform) SNR target in dB, one series per antenna count.
pub fn sweep_snr(targets_db: &[f64], tpa_counts: &[usize], settings: &SweepSettings) -> Result<SweepResult> {
    let points = targets_db
        .iter()
        .flat_map(|&db| {
            tpa_counts.iter().map(move |&n| {
                (db, ScenarioConfig { snr_target_db: PerUser::Uniform(db), num_tpas: n, ..settings.base.clone() })
            })
        })
        .collect();
    run_sweep("snr_target_db", targets_db, points, settings)
}

/// Power versus the number of users at the base antenna count. The first
/// `M` users of a seed are shared by every larger `M`.
pub fn sweep_users(user_counts: &[usize], settings: &SweepSettings) -> Result<SweepResult> {
    uniform_target_db(&settings.base)?;
    let values: Vec<f64> = user_counts.iter().map(|&m| m as f64).collect();
    let points =
        user_counts.iter().map(|&m| (m as f64, ScenarioConfig { num_users: m, ..settings.base.clone() })).collect();
    run_sweep("num_users", &values, points, settings)
}
