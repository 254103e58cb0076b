use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use conereg_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe {
        conereg_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn problem(z: &[f64], y: &[f64], w: Option<&[f64]>) -> Result<*mut ConeregProblem, ConeregStatus> {
    let mut p = ptr::null_mut();
    let status = unsafe {
        conereg_problem_new(z.as_ptr(), y.as_ptr(), w.map_or(ptr::null(), |w| w.as_ptr()), y.len(), &mut p)
    };
    if status == ConeregStatus::Ok {
        Ok(p)
    } else {
        assert!(p.is_null());
        Err(status)
    }
}

fn solve(p: *const ConeregProblem, name: &str, opts: Option<&ConeregOptions>) -> Result<*mut ConeregSolution, ConeregStatus> {
    let name = CString::new(name).unwrap();
    let mut s = ptr::null_mut();
    let status = unsafe { conereg_solve(p, name.as_ptr(), opts.map_or(ptr::null(), |o| o as *const _), &mut s) };
    if status == ConeregStatus::Ok {
        Ok(s)
    } else {
        Err(status)
    }
}

#[test]
fn three_point_projection() {
    let p = problem(&[1.0, 2.0, 3.0], &[0.0, -1.0, 0.0], None).unwrap();
    assert_eq!(unsafe { conereg_problem_len(p) }, 3);
    for name in ["mpdb", "block", "admm", "hildreth"] {
        let s = solve(p, name, None).unwrap();
        let mut x = [0.0; 3];
        let mut lambda = [0.0; 1];
        let mut why = ConeregTermination::Inexact;
        let mut cert = ConeregCertificate::default();
        unsafe {
            assert_eq!(conereg_solution_len(s), 3);
            assert_eq!(conereg_solution_constraints(s), 1);
            assert_eq!(conereg_solution_x(s, x.as_mut_ptr(), 3), ConeregStatus::Ok);
            assert_eq!(conereg_solution_lambda(s, lambda.as_mut_ptr(), 1), ConeregStatus::Ok);
            assert_eq!(conereg_solution_termination(s, &mut why), ConeregStatus::Ok);
            assert_eq!(conereg_solution_certificate(s, &mut cert), ConeregStatus::Ok);
            conereg_solution_free(s);
        }
        assert_eq!(why, ConeregTermination::Converged, "{name}");
        for v in x {
            assert!((v + 1.0 / 3.0).abs() < 1e-9, "{name}: {x:?}");
        }
        assert!((lambda[0] - 1.0 / 3.0).abs() < 1e-9, "{name}");
        assert!(cert.primal <= 1e-10 && cert.stationarity <= 1e-10);
    }
    unsafe { conereg_problem_free(p) };
}

#[test]
fn options_control_iterations() {
    let y: Vec<f64> = (0..30).map(|i| ((i * 7919) % 13) as f64).collect();
    let z: Vec<f64> = (0..30).map(f64::from).collect();
    let p = problem(&z, &y, Some(&vec![2.0; 30])).unwrap();
    let opts = ConeregOptions {
        max_iterations: 2,
        ..conereg_options_default()
    };
    let s = solve(p, "dykstra", Some(&opts)).unwrap();
    let mut why = ConeregTermination::Converged;
    unsafe {
        assert_eq!(conereg_solution_termination(s, &mut why), ConeregStatus::Ok);
        assert_eq!(conereg_solution_iterations(s), 2);
        conereg_solution_free(s);
        conereg_problem_free(p);
    }
    assert_eq!(why, ConeregTermination::IterationLimit);
}

#[test]
fn errors_map_to_status_codes() {
    assert_eq!(problem(&[1.0, 1.0, 2.0], &[0.0; 3], None).unwrap_err(), ConeregStatus::InvalidSignal);
    assert!(last_error().contains("strictly increasing"));
    assert_eq!(problem(&[1.0, 2.0], &[0.0; 2], None).unwrap_err(), ConeregStatus::InvalidSignal);

    let mut p = ptr::null_mut();
    let status = unsafe { conereg_problem_new(ptr::null(), [0.0; 3].as_ptr(), ptr::null(), 3, &mut p) };
    assert_eq!(status, ConeregStatus::NullPointer);

    let p = problem(&[1.0, 2.0, 3.0, 4.0], &[0.0, 1.0, 0.0, 1.0], None).unwrap();
    assert_eq!(solve(p, "simplex", None).unwrap_err(), ConeregStatus::UnknownSolver);
    assert!(last_error().contains("critical-index"));
    let bad = ConeregOptions {
        stop_tolerance: 0.0,
        ..conereg_options_default()
    };
    assert_eq!(solve(p, "admm", Some(&bad)).unwrap_err(), ConeregStatus::InvalidArgument);

    let s = solve(p, "meyer-pav", None).unwrap();
    let mut short = [0.0; 2];
    unsafe {
        assert_eq!(conereg_solution_x(s, short.as_mut_ptr(), 2), ConeregStatus::BufferTooSmall);
        assert_eq!(conereg_solution_x(s, ptr::null_mut(), 4), ConeregStatus::NullPointer);
        assert_eq!(conereg_solution_x(ptr::null(), short.as_mut_ptr(), 2), ConeregStatus::NullPointer);
        assert_eq!(conereg_solution_len(ptr::null()), 0);
        conereg_solution_free(s);
        conereg_problem_free(p);
        conereg_problem_free(ptr::null_mut());
        conereg_solution_free(ptr::null_mut());
    }
}

#[test]
fn error_message_truncates() {
    let _ = problem(&[1.0, 1.0, 2.0], &[0.0; 3], None);
    let mut buf = [0x7f as c_char; 8];
    let full = unsafe { conereg_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(full > 7);
    assert_eq!(buf[7], 0);
    assert_eq!(unsafe { conereg_last_error(ptr::null_mut(), 0) }, full);
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(conereg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps/
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = crate_dir.join("include/conereg.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for symbol in [
        "conereg_problem_new",
        "conereg_solve",
        "conereg_solution_x",
        "conereg_last_error",
        "CONEREG_STATUS_BUFFER_TOO_SMALL",
        "typedef struct ConeregProblem ConeregProblem",
    ] {
        assert!(text.contains(symbol), "{symbol}");
    }
    let lib = target_dir().join("libconereg_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping C link check: static library or C compiler unavailable");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
