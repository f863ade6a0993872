//! C ABI over `pinching-core`.
//!
//! Scenarios and solutions are opaque heap handles created by this library
//! and released with the matching `*_free`. Every fallible call returns a
//! [`PinchingStatus`]; on failure [`pinching_last_error`] describes the most
//! recent error on the calling thread. Outputs are written only on success.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pinching_core::harness::{self, solve_benchmark, SolveOptions};
use pinching_core::multi_pa::objective_multi;
use pinching_core::scenario::{Scenario, ScenarioConfig};
use pinching_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PinchingStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    Numerical = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// A validated scenario: constants, waveguide layout and users.
pub struct PinchingScenario(Scenario);

/// Result of the proposed solver.
pub struct PinchingSolution(harness::Solution);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let message = CString::new(message.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn fail(status: PinchingStatus, message: impl Into<String>) -> PinchingStatus {
    set_error(message);
    status
}

fn from_core(e: Error) -> PinchingStatus {
    let status = if e.is_config() { PinchingStatus::InvalidConfig } else { PinchingStatus::Numerical };
    fail(status, e.to_string())
}

/// Runs `body`, turning panics into [`PinchingStatus::Panic`].
fn guarded(body: impl FnOnce() -> PinchingStatus) -> PinchingStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(PinchingStatus::Panic, format!("panic: {message}"))
        }
    }
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pinching_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a scenario from TOML text using the same keys as the CLI config.
/// An empty string gives the default scenario.
#[no_mangle]
pub unsafe extern "C" fn pinching_scenario_from_toml(
    toml: *const c_char,
    out: *mut *mut PinchingScenario,
) -> PinchingStatus {
    guarded(|| {
        if toml.is_null() || out.is_null() {
            return fail(PinchingStatus::NullPointer, "null argument");
        }
        let Ok(text) = CStr::from_ptr(toml).to_str() else {
            return fail(PinchingStatus::InvalidUtf8, "config is not valid UTF-8");
        };
        match ScenarioConfig::from_toml_str(text).and_then(|c| c.build()) {
            Ok(scenario) => {
                *out = Box::into_raw(Box::new(PinchingScenario(scenario)));
                PinchingStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn pinching_scenario_free(scenario: *mut PinchingScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Number of TPAs, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pinching_scenario_num_tpas(scenario: *const PinchingScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.0.num_tpas())
}

/// Number of users, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pinching_scenario_num_users(scenario: *const PinchingScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.0.num_users())
}

/// Minimum total power in watts with the TPAs at `x[0..len]`, `len` equal to
/// the number of TPAs.
#[no_mangle]
pub unsafe extern "C" fn pinching_objective(
    scenario: *const PinchingScenario,
    x: *const f64,
    len: usize,
    out_power_w: *mut f64,
) -> PinchingStatus {
    guarded(|| {
        let Some(scenario) = scenario.as_ref() else {
            return fail(PinchingStatus::NullPointer, "null scenario");
        };
        if x.is_null() || out_power_w.is_null() {
            return fail(PinchingStatus::NullPointer, "null argument");
        }
        match objective_multi(std::slice::from_raw_parts(x, len), &scenario.0) {
            Ok(power) => {
                *out_power_w = power;
                PinchingStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Total power of the fixed-antenna benchmark (every TPA at the centre).
#[no_mangle]
pub unsafe extern "C" fn pinching_benchmark_power(
    scenario: *const PinchingScenario,
    out_power_w: *mut f64,
) -> PinchingStatus {
    guarded(|| {
        let Some(scenario) = scenario.as_ref() else {
            return fail(PinchingStatus::NullPointer, "null scenario");
        };
        if out_power_w.is_null() {
            return fail(PinchingStatus::NullPointer, "null argument");
        }
        match solve_benchmark(&scenario.0) {
            Ok(b) => {
                *out_power_w = b.total_power_w;
                PinchingStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Runs the proposed solver with `restarts` extra random L-BFGS starts
/// (ignored for a single TPA) drawn from `restart_seed`.
#[no_mangle]
pub unsafe extern "C" fn pinching_solve(
    scenario: *const PinchingScenario,
    restarts: usize,
    restart_seed: u64,
    out: *mut *mut PinchingSolution,
) -> PinchingStatus {
    guarded(|| {
        let Some(scenario) = scenario.as_ref() else {
            return fail(PinchingStatus::NullPointer, "null scenario");
        };
        if out.is_null() {
            return fail(PinchingStatus::NullPointer, "null argument");
        }
        let mut options = SolveOptions::default();
        options.lbfgs.restarts = restarts;
        options.lbfgs.restart_seed = restart_seed;
        match harness::solve(&scenario.0, &options) {
            Ok(sol) => {
                *out = Box::into_raw(Box::new(PinchingSolution(sol)));
                PinchingStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn pinching_solution_free(solution: *mut PinchingSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Total transmit power in watts, or NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pinching_solution_total_power_w(solution: *const PinchingSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.0.total_power_w)
}

/// Solver iterations, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pinching_solution_iterations(solution: *const PinchingSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.0.iterations)
}

/// Whether the solver met its stopping tolerance.
#[no_mangle]
pub unsafe extern "C" fn pinching_solution_converged(solution: *const PinchingSolution) -> bool {
    solution.as_ref().is_some_and(|s| s.0.converged)
}

/// Copies the optimized TPA positions into `out[0..len]`; `len` must be at
/// least the number of TPAs.
#[no_mangle]
pub unsafe extern "C" fn pinching_solution_positions(
    solution: *const PinchingSolution,
    out: *mut f64,
    len: usize,
) -> PinchingStatus {
    guarded(|| {
        let Some(solution) = solution.as_ref() else {
            return fail(PinchingStatus::NullPointer, "null solution");
        };
        let x = solution.0.x_star.as_slice();
        copy_out(x, out, len)
    })
}

/// Copies user `user`'s beamformer into `out[0..len]` as interleaved
/// (re, im) pairs; `len` must be at least twice the number of TPAs.
#[no_mangle]
pub unsafe extern "C" fn pinching_solution_beamformer(
    solution: *const PinchingSolution,
    user: usize,
    out: *mut f64,
    len: usize,
) -> PinchingStatus {
    guarded(|| {
        let Some(solution) = solution.as_ref() else {
            return fail(PinchingStatus::NullPointer, "null solution");
        };
        let Some(w) = solution.0.beamformers.get(user) else {
            return fail(PinchingStatus::InvalidConfig, format!("user {user} out of range"));
        };
        let flat: Vec<f64> = w.iter().flat_map(|c| [c.re, c.im]).collect();
        copy_out(&flat, out, len)
    })
}

unsafe fn copy_out(values: &[f64], out: *mut f64, len: usize) -> PinchingStatus {
    if out.is_null() {
        return fail(PinchingStatus::NullPointer, "null output buffer");
    }
    if len < values.len() {
        return fail(PinchingStatus::BufferTooSmall, format!("need {} doubles, got {len}", values.len()));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    PinchingStatus::Ok
}
