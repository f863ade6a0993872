use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pinching_core::harness::{
    self, emit, grid_search, solve_benchmark, sweep_epsilon, sweep_snr, sweep_users, validate, Method, SolveOptions,
    SweepResult, SweepSettings, DEFAULT_GRID_BUDGET,
};
use pinching_core::scenario::{watts_to_dbm, ScenarioConfig};
use pinching_core::{Error, Result};

#[derive(Parser)]
#[command(name = "pinching", version, about = "Transmit-power minimization for pinching-antenna systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario TOML; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's user-drop seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Extra random L-BFGS starts on top of the benchmark start.
    #[arg(long, default_value_t = 0)]
    restarts: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Seeds (user drops) per sweep point.
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    /// Output directory for the CSV and SVG files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write the CSV only.
    #[arg(long)]
    no_plots: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and print the result as JSON.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Power versus blockage density.
    SweepEpsilon {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Blockage densities in 1/m^2.
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.03,0.04,0.05,0.06,0.07,0.08,0.09,0.1")]
        values: Vec<f64>,
        /// Antenna counts, one series each.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        tpas: Vec<usize>,
    },
    /// Power versus SNR target in dB.
    SweepSnr {
        #[command(flatten)]
        sweep: SweepArgs,
        /// SNR targets in dB.
        #[arg(long, value_delimiter = ',', default_value = "10,15,20,25,30")]
        values: Vec<f64>,
        /// Antenna counts, one series each.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        tpas: Vec<usize>,
    },
    /// Power versus number of users.
    SweepUsers {
        #[command(flatten)]
        sweep: SweepArgs,
        /// User counts.
        #[arg(long, value_delimiter = ',', default_value = "5,10,15")]
        values: Vec<usize>,
    },
    /// Exhaustive search over a uniform position grid.
    GridSearch {
        #[command(flatten)]
        common: Common,
        /// Grid points per antenna coordinate.
        #[arg(long, default_value_t = 101)]
        points: usize,
        /// Maximum objective evaluations.
        #[arg(long, default_value_t = DEFAULT_GRID_BUDGET)]
        budget: u64,
    },
    /// Run the Monte-Carlo, finite-difference and beamformer oracles.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Monte-Carlo blockage samples per check.
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
    },
}

/// Blockage density of the SNR and user sweeps when no config is given.
const SWEEP_EPSILON_DEFAULT: f64 = 0.06;

fn load(common: &Common, default_epsilon: Option<f64>) -> Result<ScenarioConfig> {
    let mut config = match &common.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => {
            let mut c = ScenarioConfig::default();
            if let Some(eps) = default_epsilon {
                c.epsilon = eps;
            }
            c
        }
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn solve_options(common: &Common, seed: u64) -> SolveOptions {
    let mut options = SolveOptions::default();
    options.lbfgs.restarts = common.restarts;
    options.lbfgs.restart_seed = seed;
    options
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("result serializes"));
}

#[derive(Serialize)]
struct SolveReport {
    config: ScenarioConfig,
    benchmark_power_w: f64,
    benchmark_power_dbm: f64,
    power_w: f64,
    power_dbm: f64,
    saving_db: f64,
    solution: harness::Solution,
}

fn run_sweep(
    sweep: &SweepArgs,
    default_epsilon: Option<f64>,
    f: impl FnOnce(&SweepSettings) -> Result<SweepResult>,
) -> Result<()> {
    let base = load(&sweep.common, default_epsilon)?;
    let settings = SweepSettings { solve: solve_options(&sweep.common, base.seed), base, seeds: sweep.seeds };
    let result = f(&settings)?;
    let written = emit(&result, &sweep.out, !sweep.no_plots)?;
    println!(
        "{:>14} {:>3} {:>3} {:>16} {:>16} {:>10}",
        result.parameter, "N", "M", "benchmark_dBm", "proposed_dBm", "saving_dB"
    );
    for agg in result.aggregate().iter().filter(|a| a.method == Method::Proposed) {
        let bench = result.mean_dbm(agg.param, agg.num_tpas, Method::Benchmark).unwrap_or(f64::NAN);
        println!(
            "{:>14} {:>3} {:>3} {:>16.4} {:>16.4} {:>10.4}",
            agg.param,
            agg.num_tpas,
            agg.num_users,
            bench,
            agg.mean_power_dbm,
            bench - agg.mean_power_dbm
        );
    }
    println!("digest {}", result.digest);
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve { common } => {
            let config = load(&common, None)?;
            let scenario = config.build()?;
            let benchmark = solve_benchmark(&scenario)?;
            let solution = harness::solve(&scenario, &solve_options(&common, config.seed))?;
            print_json(&SolveReport {
                benchmark_power_w: benchmark.total_power_w,
                benchmark_power_dbm: watts_to_dbm(benchmark.total_power_w),
                power_w: solution.total_power_w,
                power_dbm: watts_to_dbm(solution.total_power_w),
                saving_db: watts_to_dbm(benchmark.total_power_w) - watts_to_dbm(solution.total_power_w),
                config,
                solution,
            });
        }
        Command::SweepEpsilon { sweep, values, tpas } => {
            run_sweep(&sweep, None, |s| sweep_epsilon(&values, &tpas, s))?;
        }
        Command::SweepSnr { sweep, values, tpas } => {
            run_sweep(&sweep, Some(SWEEP_EPSILON_DEFAULT), |s| sweep_snr(&values, &tpas, s))?;
        }
        Command::SweepUsers { sweep, values } => {
            run_sweep(&sweep, Some(SWEEP_EPSILON_DEFAULT), |s| sweep_users(&values, s))?;
        }
        Command::GridSearch { common, points, budget } => {
            let scenario = load(&common, None)?.build()?;
            print_json(&grid_search(&scenario, points, budget)?);
        }
        Command::Validate { common, samples } => {
            let config = load(&common, None)?;
            let report = validate(&config.build()?, samples, config.seed)?;
            for c in &report.checks {
                println!(
                    "{} {:<22} cases={:<4} max_deviation={:.3e} tolerance={:.1e}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.cases,
                    c.max_deviation,
                    c.tolerance
                );
            }
            return Ok(report.all_passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Io(_)) || e.is_config() { 2 } else { 3 })
        }
    }
}
