//! Closed-loop properties beyond the acceptance list.

use std::path::PathBuf;

use delaysmc::analysis::{self, AuditSettings};
use delaysmc::harness::{load_scenario_file, run, Scenario, Trace};
use delaysmc::matnum::norm;
use delaysmc::RhoMode;

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"));
    load_scenario_file(&path).unwrap()
}

#[test]
fn step_refinement_moves_final_state_little() {
    let mut sc = scenario("nominal");
    let coarse = run(&sc).unwrap().final_state().unwrap();
    sc.h /= 2.0;
    let fine = run(&sc).unwrap().final_state().unwrap();
    let gap: Vec<f64> = coarse.iter().zip(&fine).map(|(a, b)| a - b).collect();
    assert!(norm(&gap) <= 1e-4, "final state moved by {:e}", norm(&gap));
}

#[test]
fn sliding_motion_follows_reduced_dynamics() {
    let trace = run(&scenario("nominal")).unwrap();
    let t_star = trace.reach_time(0.01).unwrap();
    let k0 = trace.rows.iter().position(|r| r.t >= t_star).unwrap();
    let x0 = trace.rows[k0].x2_hat[0];
    let mut worst: f64 = 0.0;
    for row in trace.rows[k0..].iter().take_while(|r| r.t <= t_star + 1.0) {
        let predicted = (-14.0 * (row.t - t_star)).exp() * x0;
        worst = worst.max((row.x2_hat[0] - predicted).abs());
    }
    assert!(worst <= 0.02 * x0.abs(), "deviation {worst:e} against |x̂2(t*)| = {:e}", x0.abs());
}

#[test]
fn uncertain_loop_stabilizes_inside_its_basin() {
    let mut sc = scenario("uncertain");
    sc.x0 = vec![0.9, 0.9];
    let trace = run(&sc).unwrap();
    assert!(trace.final_norm().unwrap() <= 0.1);
    let audit = analysis::audit(&sc, &trace, &AuditSettings::default()).unwrap();
    assert!(audit.max_residual_ratio <= 1.05, "{audit:?}");
    assert!(audit.max_residual_ratio > 0.1, "bound should be active: {audit:?}");
}

#[test]
fn uncertain_loop_diverges_just_outside_its_basin() {
    let mut sc = scenario("uncertain");
    sc.x0 = vec![0.95, 0.95];
    let trace = run(&sc).unwrap();
    assert!(trace.final_norm().unwrap() > 1e3);
}

#[test]
fn surface_weighted_schedule_recovers_uncertain_loop() {
    // scaling the schedule by ‖S₂‖ = 5 covers the S₂ζ₂ term in ṡ
    let mut sc = scenario("uncertain_scheduled");
    if let RhoMode::Scheduled { ref mut inflation, .. } = sc.controller.rho {
        *inflation *= 5.0;
    }
    let trace = run(&sc).unwrap();
    assert!(trace.final_norm().unwrap() <= 0.1);
}

#[test]
fn residual_bound_holds_while_diverging() {
    let sc = scenario("uncertain");
    let trace = run(&sc).unwrap();
    let audit = analysis::audit(&sc, &trace, &AuditSettings::default()).unwrap();
    assert!(audit.max_residual_ratio <= 1.05, "{audit:?}");
    assert!(audit.lyapunov_violations > 0);
    assert!(!audit.passed());
}

#[test]
fn nominal_audit_passes() {
    let sc = scenario("nominal");
    let trace = run(&sc).unwrap();
    let audit = analysis::audit(&sc, &trace, &AuditSettings::default()).unwrap();
    assert!(audit.passed(), "{audit:?}");
    assert!(audit.max_fault_error <= 0.05);
    assert_eq!(audit.zeta2_max, 0.0);
}

#[test]
fn csv_round_trip_of_a_real_run() {
    let trace = run(&scenario("nominal")).unwrap();
    let mut buf = Vec::new();
    trace.write_to(&mut buf).unwrap();
    let back = Trace::read_from(buf.as_slice()).unwrap();
    assert_eq!(back.rows, trace.rows);
    assert_eq!(back.dims, trace.dims);
}
