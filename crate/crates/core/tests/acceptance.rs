//! End-to-end acceptance criteria on the shipped scenarios. Each test
//! writes one `A<n> PASS|FAIL` line straight to stderr so the verdicts
//! show up even when libtest captures output.

use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

use delaysmc::analysis::{self, AuditSettings};
use delaysmc::harness::{load_scenario_file, run, Scenario, Trace};
use delaysmc::matnum::{mat_exp, norm, solve_lyapunov, Matrix};
use delaysmc::plant::{measure_output, HistoryBuffer};
use delaysmc::predictor::{predict_x2, predict_x2_direct};
use delaysmc::Error;

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"))
}

fn scenario(name: &str) -> Scenario {
    load_scenario_file(&scenario_path(name)).unwrap()
}

fn verdict(id: &str, pass: bool, detail: String) {
    let line = format!("{id} {}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{id} failed: {detail}");
}

struct Timed {
    trace: Trace,
    elapsed: Duration,
}

fn nominal() -> &'static Timed {
    static CELL: OnceLock<Timed> = OnceLock::new();
    CELL.get_or_init(|| {
        let sc = scenario("nominal");
        let start = Instant::now();
        let trace = run(&sc).unwrap();
        Timed {
            trace,
            elapsed: start.elapsed(),
        }
    })
}

fn nominal_half_step() -> &'static Trace {
    static CELL: OnceLock<Trace> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut sc = scenario("nominal");
        sc.h /= 2.0;
        run(&sc).unwrap()
    })
}

/// Largest `|s|` once the loop has settled, taken as the chattering band.
fn chattering_band(trace: &Trace) -> f64 {
    trace.max_abs_s_after(5.0)
}

fn max_x2_error(trace: &Trace, from: f64) -> f64 {
    trace
        .rows
        .iter()
        .filter(|r| r.t >= from)
        .map(|r| norm(&r.x2_tilde))
        .fold(0.0, f64::max)
}

#[test]
fn a1_nominal_stabilization() {
    let run = nominal();
    let final_norm = run.trace.final_norm().unwrap();
    let secs = run.elapsed.as_secs_f64();
    verdict(
        "A1",
        run.trace.end_time() == 20.0 && final_norm <= 0.05 && secs <= 10.0,
        format!("‖x(20)‖ = {final_norm:.3e} (≤ 0.05), runtime {secs:.2} s (≤ 10 s)"),
    );
}

#[test]
fn a2_sliding_reach_and_band_scaling() {
    let coarse = &nominal().trace;
    let fine = nominal_half_step();
    let reach = coarse.reach_time(0.01);
    let (b1, b2) = (chattering_band(coarse), chattering_band(fine));
    let ratio = b1 / b2;
    verdict(
        "A2",
        reach.is_some_and(|t| t <= 2.0) && (1.7..=2.3).contains(&ratio),
        format!("reach time with |s| ≤ 0.01 = {reach:?} s (≤ 2), band {b1:.3e} -> {b2:.3e} at h/2, ratio {ratio:.3} (2 ± 0.3)"),
    );
}

#[test]
fn a3_predictor_exactness() {
    let coarse = max_x2_error(&nominal().trace, 1.0);
    let fine = max_x2_error(nominal_half_step(), 1.0);
    let ratio = coarse / fine;
    verdict(
        "A3",
        coarse <= 1e-3 && ratio >= 3.5,
        format!("sup_[1,20] ‖x2 - x̂2‖ = {coarse:.3e} (≤ 1e-3), h-halving ratio {ratio:.3} (≥ 3.5)"),
    );
}

#[test]
fn a4_fault_reconstruction() {
    let err = nominal()
        .trace
        .rows
        .iter()
        .filter(|r| r.t >= 5.0)
        .map(|r| (r.d[0] - r.d_hat[0]).abs())
        .fold(0.0, f64::max);
    let d_ok = nominal().trace.rows.iter().all(|r| {
        let want = 0.1 * (2.0 * r.t).sin() + 0.2 * (3.0 * r.t).cos();
        (r.d[0] - want).abs() <= 1e-15
    });
    verdict(
        "A4",
        d_ok && err <= 0.05,
        format!("sup_[5,20] |d - d̂| = {err:.3e} (≤ 0.05), d(t) = 0.1 sin 2t + 0.2 cos 3t: {d_ok}"),
    );
}

#[test]
fn a5_uncertain_stabilization() {
    let sc = scenario("uncertain");
    match run(&sc) {
        Ok(trace) => {
            let final_norm = trace.final_norm().unwrap();
            let audit = analysis::audit(&sc, &trace, &AuditSettings::default()).unwrap();
            verdict(
                "A5",
                final_norm <= 0.1 && audit.max_residual_ratio <= 1.05,
                format!(
                    "‖x(20)‖ = {final_norm:.3e} (≤ 0.1), max residual ratio {:.4} (≤ 1.05)",
                    audit.max_residual_ratio
                ),
            );
        }
        Err(aborted) => verdict("A5", false, format!("run aborted: {aborted}")),
    }
}

#[test]
fn a6_low_gain_is_unstable() {
    let mut sc = scenario("uncertain");
    sc.controller.rho = delaysmc::RhoMode::Constant(2.0);
    let (diverged, s_max) = match run(&sc) {
        Ok(trace) => (false, trace.max_abs_s_after(5.0)),
        Err(aborted) => (
            matches!(aborted.reason, Error::Divergence { .. }),
            aborted.partial.max_abs_s_after(5.0),
        ),
    };
    verdict(
        "A6",
        diverged || s_max > 1.0,
        format!("divergence abort: {diverged}, max |s| after 5 s = {s_max:.3e} (> 1)"),
    );
}

#[test]
fn a7_certification() {
    let sc = scenario("uncertain");
    let report = analysis::certify(&sc, 1.05).unwrap();
    let p2 = report.p2.as_ref().unwrap()[(0, 0)];
    // independent assembly from scalar pieces: P₂ = 1/28, r̄ = 0.1,
    // √(1 + 25), max_τ ‖e^{τ}[0.4, 0.4]‖ = 0.4·√2·e^{0.5}
    let gain = 0.4 * 2f64.sqrt() * 0.5f64.exp();
    let expected = 1.0 / (2.0 * 1.05 * (1.0 / 28.0) * 1.1 * 26f64.sqrt() * gain);
    let got = report.delta_bar_max.unwrap_or(f64::INFINITY);
    let rel = (got - expected).abs() / expected;
    verdict(
        "A7",
        (p2 - 1.0 / 28.0).abs() <= 1e-10 && rel <= 0.02 && report.feasible && sc.uncertainty.delta_bar == 1.0,
        format!(
            "P2 = {p2:.15} (1/28 ± 1e-10), delta_bar_max = {got:.6} vs {expected:.6} (±2%), feasible = {}",
            report.feasible
        ),
    );
}

#[test]
fn a8_lyapunov_audit_with_scheduled_gain() {
    let mut details = Vec::new();
    let mut pass = true;
    for name in ["nominal_scheduled", "uncertain_scheduled"] {
        let sc = scenario(name);
        match run(&sc) {
            Ok(trace) => {
                let audit = analysis::audit(&sc, &trace, &AuditSettings::default()).unwrap();
                pass &= audit.lyapunov_checked > 0 && audit.lyapunov_violations == 0;
                details.push(format!(
                    "{name}: {} violations in {} checked steps, ‖x(20)‖ = {:.3e}",
                    audit.lyapunov_violations,
                    audit.lyapunov_checked,
                    trace.final_norm().unwrap()
                ));
            }
            Err(aborted) => {
                pass = false;
                details.push(format!("{name}: aborted: {aborted}"));
            }
        }
    }
    verdict("A8", pass, details.join("; "));
}

/// Plain Taylor series without scaling; accurate for the small norms
/// drawn below.
fn taylor_exp(m: &Matrix) -> Matrix {
    let n = m.rows();
    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..200 {
        term = (&term * m).scale(1.0 / k as f64);
        sum = &sum + &term;
        if term.max_abs() < 1e-20 {
            break;
        }
    }
    sum
}

#[test]
fn a9_oracle_equivalences() {
    // predictor pair along the nominal run, every 50th step
    let sc = scenario("nominal");
    let trace = &nominal().trace;
    let mut buf = HistoryBuffer::with_constant_prehistory(&sc.x0, 0.0, sc.h, sc.delay.tau_max).unwrap();
    let mut predictor_gap: f64 = 0.0;
    for (k, row) in trace.rows.iter().enumerate() {
        if k > 0 {
            buf.push(row.state());
        }
        if k % 50 != 0 {
            continue;
        }
        let y = measure_output(&buf, row.t, &sc.delay, &sc.model).unwrap();
        let a = predict_x2(&y, &buf, row.t, &sc.delay, &sc.model, sc.h).unwrap();
        let b = predict_x2_direct(&y, &buf, row.t, &sc.delay, &sc.model).unwrap();
        assert_eq!(a.x_hat_2, row.x2_hat, "replayed history differs from the run at t = {}", row.t);
        predictor_gap = predictor_gap.max((a.x_hat_2[0] - b.x_hat_2[0]).abs());
    }

    // 100 random Hurwitz matrices of size 1..=4
    let mut runner = TestRunner::deterministic();
    let strategy = (1usize..=4).prop_flat_map(|n| (proptest::collection::vec(-1.0..1.0f64, n * n), proptest::strategy::Just(n)));
    let mut exp_gap: f64 = 0.0;
    let mut lyap_residual: f64 = 0.0;
    for _ in 0..100 {
        let (data, n) = strategy.new_tree(&mut runner).unwrap().current();
        let raw = Matrix::from_row_major(n, n, data).unwrap();
        let shift = raw.norm_1() + 0.1;
        let a = &raw - &Matrix::identity(n).scale(shift);
        exp_gap = exp_gap.max((&mat_exp(&a, 1.0).unwrap() - &taylor_exp(&a)).max_abs());
        let p = solve_lyapunov(&a).unwrap();
        let residual = &(&(&a.transpose() * &p) + &(&p * &a)) + &Matrix::identity(n);
        lyap_residual = lyap_residual.max(residual.max_abs());
    }
    verdict(
        "A9",
        predictor_gap <= 1e-6 && exp_gap <= 1e-10 && lyap_residual <= 1e-10,
        format!(
            "predictor RK4 vs quadrature {predictor_gap:.3e} (≤ 1e-6), mat_exp vs Taylor {exp_gap:.3e} (≤ 1e-10), Lyapunov residual {lyap_residual:.3e} (≤ 1e-10)"
        ),
    );
}

#[test]
fn a10_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_delaysmc");
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("run{i}.csv"));
        let status = std::process::Command::new(bin)
            .arg("simulate")
            .arg("--scenario")
            .arg(scenario_path("nominal"))
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&out).unwrap());
    }
    let mut in_process = Vec::new();
    nominal().trace.write_to(&mut in_process).unwrap();
    let same = outputs[0] == outputs[1] && outputs[0] == in_process;
    verdict(
        "A10",
        same,
        format!("two CLI runs and the in-process trace byte-identical: {same} ({} bytes)", outputs[0].len()),
    );
}
