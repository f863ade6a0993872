//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each and exits nonzero if any fails. Tolerances are the constants
//! below.

use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pinching_core::channel::TpaPositions;
use pinching_core::expected_snr::{build_expected_matrix, exact_snr_moments, monte_carlo_for_user, user_channel};
use pinching_core::harness::{
    grid_search, solve_benchmark, sweep_epsilon, sweep_snr, sweep_users, Method, SweepResult, SweepSettings,
    DEFAULT_GRID_BUDGET,
};
use pinching_core::multi_pa::{
    gradient_multi, lbfgs_solve, objective_multi, optimal_beamformer, solve_multi_start, LbfgsOptions, Termination,
    FD_STEP,
};
use pinching_core::scenario::{watts_to_dbm, PerUser, Scenario, ScenarioConfig, User};
use pinching_core::single_pa::{pgd_solve, power_closed_form, PgdOptions};

// Criterion 1
const MC_INSTANCES: usize = 100;
const MC_SAMPLES: u64 = 1_000_000;
const MC_Z: f64 = 3.0;
const MC_MIN_PASSING: usize = 97;
const MC_TIME_LIMIT: Duration = Duration::from_secs(120);
// Criterion 2
const CONVEX_USERS: usize = 50;
const CONVEX_POINTS: usize = 1000;
const CONVEX_SLACK: f64 = 1e-9;
// Criterion 3
const PGD_INSTANCES: u64 = 50;
const PGD_GRID_POINTS: usize = 100_000;
const PGD_DB_TOL: f64 = 0.01;
const PGD_TIME_LIMIT: Duration = Duration::from_secs(30);
// Criterion 4
const BF_PAIRS: usize = 100;
const BF_DIRECTIONS: usize = 1000;
const BF_EQUALITY_TOL: f64 = 1e-10;
const BF_EIGEN_TOL: f64 = 1e-10;
// Criterion 5
const GRAD_POINTS: usize = 100;
const GRAD_TOL: f64 = 1e-4;
const GRAD_MAX_DEGENERATE_FRACTION: f64 = 0.01;
// Criterion 6
const GLOBAL_SEEDS: u64 = 20;
const GLOBAL_GRID_POINTS: usize = 500;
const GLOBAL_RESTARTS: usize = 4;
const GLOBAL_DB_GAP: f64 = 0.5;
const GLOBAL_MIN_PASSING: usize = 18;
const GLOBAL_TIME_LIMIT: Duration = Duration::from_secs(300);
// Criterion 7
const CONV_RUNS: u64 = 50;
const CONV_MEDIAN_ITERS: usize = 50;
// Criterion 8
const SWEEP_SEEDS: usize = 20;
const SNR_SHIFT_DB_TOL: f64 = 1e-6;
const USERS_MIN_SAVING_DB: f64 = 3.0;
const SWEEP_TIME_LIMIT: Duration = Duration::from_secs(600);

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn random_config(rng: &mut ChaCha8Rng, n: usize, m: usize) -> ScenarioConfig {
    ScenarioConfig {
        num_tpas: n,
        num_users: m,
        epsilon: rng.gen_range(0.01..=0.1),
        seed: rng.gen(),
        ..Default::default()
    }
}

fn random_positions(rng: &mut ChaCha8Rng, n: usize) -> TpaPositions {
    TpaPositions::new((0..n).map(|_| rng.gen_range(0.0..=20.0)).collect(), 20.0).unwrap()
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn norm_sqr(w: &[Complex64]) -> f64 {
    w.iter().map(|v| v.norm_sqr()).sum()
}

fn expected_snr_monte_carlo() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut within = 0;
    let mut worst: f64 = 0.0;
    for k in 0..MC_INSTANCES {
        let n = rng.gen_range(1..=8);
        let m = rng.gen_range(1..=10);
        let sc = random_config(&mut rng, n, m).build().unwrap();
        let user = &sc.users[rng.gen_range(0..m)];
        let x = random_positions(&mut rng, n);
        let w = random_direction(&mut rng, n);
        let a = build_expected_matrix(&x, user, &sc.constants, &sc.layout).unwrap();
        let closed = a.quad_form(&w) / user.noise_power_w;
        let est = monte_carlo_for_user(&x, &w, user, &sc.constants, &sc.layout, MC_SAMPLES, 7000 + k as u64).unwrap();
        let (gains, probs) = user_channel(&x, user, &sc.constants, &sc.layout).unwrap();
        let (_, variance) = exact_snr_moments(&gains, &probs, &w, user.noise_power_w).unwrap();
        let se = (variance / MC_SAMPLES as f64).sqrt();
        let z = if se > 0.0 { (est.mean - closed).abs() / se } else { f64::from(u8::from(est.mean != closed)) };
        worst = worst.max(z);
        if z <= MC_Z {
            within += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        within >= MC_MIN_PASSING && elapsed <= MC_TIME_LIMIT,
        format!(
            "{within}/{MC_INSTANCES} instances within {MC_Z} standard errors (need {MC_MIN_PASSING}), max z {worst:.2}, {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn single_pa_convexity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut violations = 0;
    let mut checks = 0;
    for _ in 0..CONVEX_USERS {
        let sc = random_config(&mut rng, 1, 1).build().unwrap();
        let user = User { snr_target_linear: 10f64.powf(rng.gen_range(0.0..4.0)), ..sc.users[0] };
        let p = |x: f64| power_closed_form(x, &user, &sc.constants, &sc.layout);
        let h = 20.0 / (CONVEX_POINTS - 1) as f64;
        let grid: Vec<f64> = (0..CONVEX_POINTS).map(|i| p(i as f64 * h)).collect();
        for i in 1..CONVEX_POINTS - 1 {
            // Midpoint convexity on neighbouring grid points, and the
            // central second difference.
            let mid = 0.5 * (grid[i - 1] + grid[i + 1]);
            let second = (grid[i - 1] - 2.0 * grid[i] + grid[i + 1]) / (h * h);
            checks += 2;
            if grid[i] > mid + CONVEX_SLACK * grid[i] {
                violations += 1;
            }
            if second < -CONVEX_SLACK * grid[i] / (h * h) {
                violations += 1;
            }
        }
        for _ in 0..CONVEX_POINTS {
            let (a, b) = (rng.gen_range(0.0..=20.0), rng.gen_range(0.0..=20.0));
            checks += 1;
            if p(0.5 * (a + b)) > 0.5 * (p(a) + p(b)) * (1.0 + CONVEX_SLACK) {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations in {checks} checks over {CONVEX_USERS} users"))
}

fn single_pa_global_optimality() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for seed in 0..PGD_INSTANCES {
        let sc = ScenarioConfig { num_tpas: 1, num_users: 10, seed, ..Default::default() }.build().unwrap();
        let pgd = pgd_solve(&sc, &PgdOptions::default()).unwrap();
        let grid = grid_search(&sc, PGD_GRID_POINTS, DEFAULT_GRID_BUDGET).unwrap();
        let gap = (watts_to_dbm(pgd.total_power_w) - watts_to_dbm(grid.best_power_w)).abs();
        worst = worst.max(gap);
        if gap > PGD_DB_TOL || !pgd.converged {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && elapsed <= PGD_TIME_LIMIT,
        format!(
            "{failures}/{PGD_INSTANCES} instances off by more than {PGD_DB_TOL} dB, max gap {worst:.2e} dB, {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn dense_largest_eigenvalue(dense: &[Vec<Complex64>]) -> f64 {
    let n = dense.len();
    let m = DMatrix::from_fn(n, n, |i, j| dense[i][j]);
    m.symmetric_eigen().eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn beamformer_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut violations = 0;
    let mut worst_equality: f64 = 0.0;
    for _ in 0..BF_PAIRS {
        let n = rng.gen_range(2..=8);
        let sc = random_config(&mut rng, n, 1).build().unwrap();
        let user = &sc.users[0];
        let x = random_positions(&mut rng, n);
        let a = build_expected_matrix(&x, user, &sc.constants, &sc.layout).unwrap();
        let w = optimal_beamformer(&a, user).unwrap();
        let power = norm_sqr(&w);
        let equality = (a.quad_form(&w) - user.required_power()).abs() / user.required_power();
        worst_equality = worst_equality.max(equality);
        if equality > BF_EQUALITY_TOL {
            violations += 1;
        }
        // Independent dense eigensolver: the minimum power is c sigma^2 / lambda_max.
        let lambda = dense_largest_eigenvalue(&a.dense());
        if (power - user.required_power() / lambda).abs() > BF_EIGEN_TOL * power {
            violations += 1;
        }
        for _ in 0..BF_DIRECTIONS {
            let mu = random_direction(&mut rng, n);
            let scaled = user.required_power() * norm_sqr(&mu) / a.quad_form(&mu);
            if power > scaled {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!(
            "{violations} violations over {BF_PAIRS} pairs x {BF_DIRECTIONS} directions, max constraint error {worst_equality:.1e}"
        ),
    )
}

fn gradient_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut worst, mut failures, mut degenerate) = (0.0f64, 0, 0);
    for _ in 0..GRAD_POINTS {
        let sc = random_config(&mut rng, 4, 10).build().unwrap();
        let x = random_positions(&mut rng, 4).into_vec();
        let g = gradient_multi(&x, &sc).unwrap();
        if g.fd_fallbacks > 0 {
            degenerate += 1;
            continue;
        }
        let h = FD_STEP * sc.side();
        let floor = 1e-6 * g.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..4 {
            let (mut plus, mut minus) = (x.clone(), x.clone());
            plus[i] += h;
            minus[i] -= h;
            let fd = (objective_multi(&plus, &sc).unwrap() - objective_multi(&minus, &sc).unwrap()) / (2.0 * h);
            let rel = (g.values[i] - fd).abs() / g.values[i].abs().max(fd.abs()).max(floor);
            worst = worst.max(rel);
            if rel > GRAD_TOL {
                failures += 1;
            }
        }
    }
    let fraction = degenerate as f64 / GRAD_POINTS as f64;
    outcome(
        failures == 0 && fraction < GRAD_MAX_DEGENERATE_FRACTION,
        format!("{failures} components above {GRAD_TOL:.0e}, max relative error {worst:.2e}, {degenerate} degenerate points excluded"),
    )
}

fn near_global_quality() -> Outcome {
    let start = Instant::now();
    let options = LbfgsOptions { restarts: GLOBAL_RESTARTS, ..Default::default() };
    let mut passed = true;
    let mut parts = Vec::new();
    for m in [5, 10] {
        let mut within = 0;
        let mut worst: f64 = f64::NEG_INFINITY;
        for seed in 0..GLOBAL_SEEDS {
            let sc = ScenarioConfig { num_tpas: 2, num_users: m, epsilon: 0.05, seed, ..Default::default() }
                .build()
                .unwrap();
            let sol = solve_multi_start(&sc, &LbfgsOptions { restart_seed: seed, ..options }).unwrap();
            let grid = grid_search(&sc, GLOBAL_GRID_POINTS, DEFAULT_GRID_BUDGET).unwrap();
            let gap = watts_to_dbm(sol.total_power_w) - watts_to_dbm(grid.best_power_w);
            worst = worst.max(gap);
            if gap <= GLOBAL_DB_GAP {
                within += 1;
            }
        }
        passed &= within >= GLOBAL_MIN_PASSING;
        parts.push(format!("M={m}: {within}/{GLOBAL_SEEDS} within {GLOBAL_DB_GAP} dB (worst {worst:+.3} dB)"));
    }
    let elapsed = start.elapsed();
    outcome(passed && elapsed <= GLOBAL_TIME_LIMIT, format!("{}, {:.1} s", parts.join("; "), elapsed.as_secs_f64()))
}

fn convergence_behaviour() -> Outcome {
    let mut iterations = Vec::new();
    let mut monotone = true;
    let mut unconverged = 0;
    for seed in 0..CONV_RUNS {
        let sc =
            ScenarioConfig { num_tpas: 4, num_users: 10, epsilon: 0.05, seed, ..Default::default() }.build().unwrap();
        let sol = lbfgs_solve(&sc, &LbfgsOptions::default(), &sc.layout.center_positions()).unwrap();
        monotone &= sol.trace.windows(2).all(|w| w[1].objective_w <= w[0].objective_w);
        if !matches!(sol.termination, Termination::Stationary | Termination::SmallDecrease) {
            unconverged += 1;
        }
        iterations.push(sol.iterations);
    }
    iterations.sort_unstable();
    let median = iterations[iterations.len() / 2];
    outcome(
        median <= CONV_MEDIAN_ITERS && monotone,
        format!(
            "median {median} iterations (limit {CONV_MEDIAN_ITERS}), max {}, {unconverged} runs stopped without meeting a tolerance, traces nonincreasing: {monotone}",
            iterations.last().unwrap()
        ),
    )
}

struct Sweeps {
    epsilon: (SweepResult, Duration),
    snr: (SweepResult, Duration),
    users: (SweepResult, Duration),
}

fn timed(f: impl FnOnce() -> SweepResult) -> (SweepResult, Duration) {
    let start = Instant::now();
    let r = f();
    (r, start.elapsed())
}

fn sweeps() -> &'static Sweeps {
    static SWEEPS: OnceLock<Sweeps> = OnceLock::new();
    SWEEPS.get_or_init(|| {
        let settings = |epsilon: f64| SweepSettings {
            base: ScenarioConfig { epsilon, ..Default::default() },
            seeds: SWEEP_SEEDS,
            ..Default::default()
        };
        let eps_values: Vec<f64> = (1..=10).map(|k| k as f64 / 100.0).collect();
        Sweeps {
            epsilon: timed(|| sweep_epsilon(&eps_values, &[1, 2, 3, 4], &settings(0.05)).unwrap()),
            snr: timed(|| sweep_snr(&[10.0, 15.0, 20.0, 25.0, 30.0], &[1, 2, 4], &settings(0.06)).unwrap()),
            users: timed(|| sweep_users(&[5, 10, 15], &settings(0.06)).unwrap()),
        }
    })
}

fn trend_reproduction() -> Outcome {
    let s = sweeps();
    let mut notes = Vec::new();
    let mut passed = true;

    // Fig. 3 analog: power nondecreasing in epsilon, wider saving when denser.
    let (eps, eps_time) = &s.epsilon;
    for n in eps.tpa_counts() {
        let means: Vec<f64> = eps.values.iter().map(|&v| eps.mean_dbm(v, n, Method::Proposed).unwrap()).collect();
        let ok = means.windows(2).all(|w| w[1] >= w[0]);
        passed &= ok;
        if !ok {
            notes.push(format!("epsilon: mean power decreases somewhere for N={n}"));
        }
    }
    let (lo, hi) = (eps.mean_saving_db(0.02, 4).unwrap(), eps.mean_saving_db(0.08, 4).unwrap());
    passed &= hi >= lo;
    notes.push(format!("epsilon saving N=4: {lo:.2} dB at 0.02, {hi:.2} dB at 0.08"));

    // Fig. 4 analog: exact dB shift under uniform target scaling.
    let (snr, snr_time) = &s.snr;
    let mut worst_shift: f64 = 0.0;
    let mut strictly_increasing = true;
    for row in snr.rows.iter().filter(|r| r.method == Method::Proposed && r.param != snr.values[0]) {
        let base = snr
            .rows
            .iter()
            .find(|r| {
                r.method == Method::Proposed
                    && r.param == snr.values[0]
                    && r.seed == row.seed
                    && r.num_tpas == row.num_tpas
            })
            .unwrap();
        worst_shift = worst_shift.max((row.power_dbm - base.power_dbm - (row.param - base.param)).abs());
        strictly_increasing &= row.power_w > base.power_w;
    }
    passed &= worst_shift <= SNR_SHIFT_DB_TOL && strictly_increasing;
    notes.push(format!("snr shift error {worst_shift:.1e} dB"));

    // Fig. 5 analog: at least 3 dB mean saving at every M.
    let (users, users_time) = &s.users;
    for &m in &users.values {
        let saving = users.mean_saving_db(m, 4).unwrap();
        passed &= saving >= USERS_MIN_SAVING_DB;
        notes.push(format!("M={m} saving {saving:.2} dB"));
    }

    for (name, t) in [("epsilon", eps_time), ("snr", snr_time), ("users", users_time)] {
        passed &= *t <= SWEEP_TIME_LIMIT;
        notes.push(format!("{name} sweep {:.1} s", t.as_secs_f64()));
    }
    outcome(passed, notes.join(", "))
}

fn dominance() -> Outcome {
    let s = sweeps();
    let mut solves = 0;
    let mut exceptions = 0;
    for result in [&s.epsilon.0, &s.snr.0, &s.users.0] {
        for pair in result.rows.chunks(2) {
            assert_eq!((pair[0].method, pair[1].method), (Method::Benchmark, Method::Proposed));
            solves += 1;
            if pair[1].power_w > pair[0].power_w {
                exceptions += 1;
            }
        }
    }
    // The single-user centred case where the benchmark is already optimal.
    let mut sc: Scenario =
        ScenarioConfig { num_tpas: 1, num_users: 1, snr_target_db: PerUser::Uniform(20.0), ..Default::default() }
            .build()
            .unwrap();
    sc.users[0].position_m = [10.0, 0.0, 0.0];
    let bench = solve_benchmark(&sc).unwrap().total_power_w;
    let proposed = pgd_solve(&sc, &PgdOptions::default()).unwrap().total_power_w;
    solves += 1;
    if proposed > bench {
        exceptions += 1;
    }
    outcome(exceptions == 0, format!("{exceptions} exceptions in {solves} solves"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("expected-SNR Monte-Carlo agreement", expected_snr_monte_carlo),
        ("single-PA power convexity", single_pa_convexity),
        ("single-PA global optimality vs grid", single_pa_global_optimality),
        ("beamformer optimality", beamformer_optimality),
        ("gradient fidelity vs central differences", gradient_fidelity),
        ("near-global quality vs 500x500 grid", near_global_quality),
        ("L-BFGS convergence behaviour", convergence_behaviour),
        ("sweep trend reproduction", trend_reproduction),
        ("proposed never exceeds benchmark", dominance),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let out = run();
        if !out.passed {
            failed += 1;
        }
        println!("criterion {} [{}] {name}: {}", i + 1, if out.passed { "PASS" } else { "FAIL" }, out.detail);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
