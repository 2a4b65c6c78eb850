use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::ptr;

use delaysmc_ffi::*;

fn scenario_path(name: &str) -> CString {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios").join(format!("{name}.json"));
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(dsmc_last_error()) }.to_str().unwrap().to_owned()
}

fn load(name: &str) -> *mut DsmcScenario {
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { dsmc_scenario_from_file(scenario_path(name).as_ptr(), &mut sc) }, DsmcStatus::Ok);
    sc
}

const SHORT: &str = r#"{
    "model": {"A11": [[-1]], "A12": [[1]], "A21": [[-3]], "A22": [[1]], "B1": [[1]]},
    "delay": {"a": 0.4, "b": 0.1, "c": 1.0, "r_bar": 0.1, "tau_max": 0.5},
    "fault": {"terms": [{"amp": 0.1, "freq": 2, "kind": "sin"}], "alpha": 0.1},
    "observer": {"k1": 5, "k2": 2, "k3": 5, "k4": 2},
    "controller": {"S2": [[-5]], "rho": {"mode": "constant", "value": 2}},
    "sim": {"x0": [1, 1], "t_final": 0.5, "h": 0.01}
}"#;

#[test]
fn run_and_read_columns() {
    let json = CString::new(SHORT).unwrap();
    let mut sc = ptr::null_mut();
    let mut tr = ptr::null_mut();
    unsafe {
        assert_eq!(dsmc_scenario_from_json(json.as_ptr(), &mut sc), DsmcStatus::Ok);
        assert_eq!(dsmc_run(sc, &mut tr), DsmcStatus::Ok);
        assert_eq!(dsmc_trace_len(tr), 51);
        let cols = dsmc_trace_columns(tr);
        let names: Vec<String> = (0..cols)
            .map(|i| CStr::from_ptr(dsmc_trace_column_name(tr, i)).to_str().unwrap().to_owned())
            .collect();
        assert_eq!(names[0], "t");
        assert_eq!(names.last().unwrap(), "rho");
        assert!(dsmc_trace_column_name(tr, cols).is_null());

        let mut row = vec![0.0; cols];
        assert_eq!(dsmc_trace_row(tr, 50, row.as_mut_ptr(), cols), DsmcStatus::Ok);
        assert!((row[0] - 0.5).abs() < 1e-12);
        let at = |n: &str| row[names.iter().position(|c| c == n).unwrap()];
        assert_eq!(at("u"), at("u_d") + at("u_nom") + at("u_sm"));
        assert_eq!(at("rho"), 2.0);

        assert_eq!(dsmc_trace_row(tr, 51, row.as_mut_ptr(), cols), DsmcStatus::InvalidArgument);
        assert_eq!(dsmc_trace_row(tr, 0, row.as_mut_ptr(), cols - 1), DsmcStatus::InvalidArgument);
        assert!(last_error().contains("buffer holds"));
        dsmc_trace_free(tr);
        dsmc_scenario_free(sc);
    }
}

#[test]
fn csv_round_trip_and_audit() {
    let dir = tempfile::tempdir().unwrap();
    let csv = CString::new(dir.path().join("t.csv").to_str().unwrap()).unwrap();
    let sc = load("nominal");
    let mut tr = ptr::null_mut();
    let mut back = ptr::null_mut();
    unsafe {
        assert_eq!(dsmc_run(sc, &mut tr), DsmcStatus::Ok);
        assert_eq!(dsmc_trace_write_csv(tr, csv.as_ptr()), DsmcStatus::Ok);
        assert_eq!(dsmc_trace_read_csv(csv.as_ptr(), &mut back), DsmcStatus::Ok);
        assert_eq!(dsmc_trace_len(back), dsmc_trace_len(tr));

        let mut audit = DsmcAudit::default();
        assert_eq!(dsmc_audit(sc, back, &mut audit), DsmcStatus::Ok);
        assert!(audit.passed);
        assert!(audit.lyapunov_checked > 0);
        assert!(audit.max_fault_error <= 0.05);
        dsmc_trace_free(back);
        dsmc_trace_free(tr);
        dsmc_scenario_free(sc);
    }
}

#[test]
fn certificate_values() {
    let sc = load("uncertain");
    let mut cert = DsmcCertificate::default();
    unsafe {
        assert_eq!(dsmc_certify(sc, 1.05, &mut cert), DsmcStatus::Ok);
        dsmc_scenario_free(sc);
    }
    assert!(cert.feasible);
    assert!((cert.lambda_max_p2 - 1.0 / 28.0).abs() < 1e-12);
    assert!((cert.delta_bar_max - 2.5488081512061775).abs() < 1e-9);

    let sc = load("nominal");
    unsafe {
        assert_eq!(dsmc_certify(sc, 1.05, &mut cert), DsmcStatus::Ok);
        dsmc_scenario_free(sc);
    }
    assert!(cert.delta_bar_max.is_infinite());
}

#[test]
fn aborted_run_returns_partial_trace() {
    let text = SHORT.replace(r#""h": 0.01}"#, r#""h": 0.01, "divergence_limit": 1.0}"#);
    let json = CString::new(text).unwrap();
    let mut sc = ptr::null_mut();
    let mut tr = ptr::null_mut();
    unsafe {
        assert_eq!(dsmc_scenario_from_json(json.as_ptr(), &mut sc), DsmcStatus::Ok);
        assert_eq!(dsmc_run(sc, &mut tr), DsmcStatus::Aborted);
        assert!(!tr.is_null());
        assert!(dsmc_trace_len(tr) >= 1);
        assert!(last_error().contains("diverged"), "{}", last_error());
        dsmc_trace_free(tr);
        dsmc_scenario_free(sc);
    }
}

#[test]
fn bad_inputs_report_codes() {
    let mut sc = ptr::null_mut();
    unsafe {
        assert_eq!(dsmc_scenario_from_json(ptr::null(), &mut sc), DsmcStatus::InvalidArgument);
        let bad = CString::new(SHORT.replace(r#""r_bar": 0.1"#, r#""r_bar": 1.0"#)).unwrap();
        assert_eq!(dsmc_scenario_from_json(bad.as_ptr(), &mut sc), DsmcStatus::Scenario);
        assert!(last_error().contains("delay.r_bar"));
        let missing = CString::new("/nonexistent.json").unwrap();
        assert_eq!(dsmc_scenario_from_file(missing.as_ptr(), &mut sc), DsmcStatus::Io);
        assert!(sc.is_null());
        assert_eq!(dsmc_trace_len(ptr::null()), 0);
        dsmc_scenario_free(ptr::null_mut());
        dsmc_trace_free(ptr::null_mut());
    }
}

#[test]
fn matrix_kernels() {
    let a = [-2.0, 1.0, 0.0, -3.0];
    let mut e = [0.0; 4];
    let mut p = [0.0; 4];
    unsafe {
        assert_eq!(dsmc_mat_exp(2, a.as_ptr(), 1.0, e.as_mut_ptr()), DsmcStatus::Ok);
        assert_eq!(dsmc_solve_lyapunov(2, a.as_ptr(), p.as_mut_ptr()), DsmcStatus::Ok);
    }
    // upper triangular: e^{-2}, e^{-2} - e^{-3}, 0, e^{-3}
    let (e2, e3) = ((-2f64).exp(), (-3f64).exp());
    for (got, want) in e.iter().zip([e2, e2 - e3, 0.0, e3]) {
        assert!((got - want).abs() < 1e-13, "{e:?}");
    }
    // AᵀP + PA = −I
    let r = |i: usize, j: usize| (0..2).map(|k| a[k * 2 + i] * p[k * 2 + j] + p[i * 2 + k] * a[k * 2 + j]).sum::<f64>();
    for i in 0..2 {
        for j in 0..2 {
            let want = if i == j { -1.0 } else { 0.0 };
            assert!((r(i, j) - want).abs() < 1e-12);
        }
    }

    let unstable = [1.0];
    let mut out = [0.0];
    assert_eq!(unsafe { dsmc_solve_lyapunov(1, unstable.as_ptr(), out.as_mut_ptr()) }, DsmcStatus::Numeric);
    assert_eq!(unsafe { dsmc_mat_exp(0, a.as_ptr(), 1.0, e.as_mut_ptr()) }, DsmcStatus::InvalidArgument);
}

#[test]
fn header_declares_every_export() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/delaysmc.h")).unwrap();
    let source = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}
