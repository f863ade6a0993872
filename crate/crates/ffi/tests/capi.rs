use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use pinching_ffi::*;

fn scenario(toml: &str) -> *mut PinchingScenario {
    let text = CString::new(toml).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pinching_scenario_from_toml(text.as_ptr(), &mut out) }, PinchingStatus::Ok);
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(pinching_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn solve_round_trip() {
    let sc = scenario("N = 3\nM = 4\nseed = 1\n");
    unsafe {
        assert_eq!(pinching_scenario_num_tpas(sc), 3);
        assert_eq!(pinching_scenario_num_users(sc), 4);
        let mut bench = 0.0;
        assert_eq!(pinching_benchmark_power(sc, &mut bench), PinchingStatus::Ok);
        let mut sol = ptr::null_mut();
        assert_eq!(pinching_solve(sc, 0, 0, &mut sol), PinchingStatus::Ok);
        let power = pinching_solution_total_power_w(sol);
        assert!(power <= bench);
        assert!(pinching_solution_converged(sol));
        assert!(pinching_solution_iterations(sol) > 0);

        let mut x = [0.0; 3];
        assert_eq!(pinching_solution_positions(sol, x.as_mut_ptr(), 3), PinchingStatus::Ok);
        let mut again = 0.0;
        assert_eq!(pinching_objective(sc, x.as_ptr(), 3, &mut again), PinchingStatus::Ok);
        assert!((again - power).abs() <= 1e-12 * power);

        let mut total = 0.0;
        for m in 0..4 {
            let mut w = [0.0; 6];
            assert_eq!(pinching_solution_beamformer(sol, m, w.as_mut_ptr(), 6), PinchingStatus::Ok);
            total += w.iter().map(|v| v * v).sum::<f64>();
        }
        assert!((total - power).abs() <= 1e-10 * power);
        pinching_solution_free(sol);
        pinching_scenario_free(sc);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(pinching_scenario_from_toml(ptr::null(), &mut out), PinchingStatus::NullPointer);
        let bad = CString::new("N = 2\nbogus = 1\n").unwrap();
        assert_eq!(pinching_scenario_from_toml(bad.as_ptr(), &mut out), PinchingStatus::InvalidConfig);
        assert!(out.is_null());
        assert!(last_error().contains("bogus"));

        let sc = scenario("");
        let mut power = 0.0;
        let x = [1.0, 2.0];
        assert_eq!(pinching_objective(sc, x.as_ptr(), 2, &mut power), PinchingStatus::InvalidConfig);
        assert!(last_error().contains("2 positions for 4 TPAs"));
        assert_eq!(pinching_benchmark_power(ptr::null(), &mut power), PinchingStatus::NullPointer);

        let mut sol = ptr::null_mut();
        assert_eq!(pinching_solve(sc, 0, 0, &mut sol), PinchingStatus::Ok);
        let mut small = [0.0; 2];
        assert_eq!(pinching_solution_positions(sol, small.as_mut_ptr(), 2), PinchingStatus::BufferTooSmall);
        assert_eq!(pinching_solution_beamformer(sol, 99, small.as_mut_ptr(), 2), PinchingStatus::InvalidConfig);
        assert!(pinching_solution_total_power_w(ptr::null()).is_nan());
        pinching_solution_free(sol);
        pinching_scenario_free(sc);
        pinching_scenario_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/pinching.h")).unwrap();
    for name in [
        "pinching_last_error",
        "pinching_scenario_from_toml",
        "pinching_solve",
        "pinching_solution_beamformer",
        "PINCHING_STATUS_BUFFER_TOO_SMALL",
        "typedef struct PinchingScenario PinchingScenario",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

/// `target/<profile>`, where cargo puts the static library.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_static_library() {
    let lib = artifact_dir().join("libpinching_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping: no C compiler or {} not built", lib.display());
        return;
    }
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
