//! Single-rate closed loop: measure, predict, control, observer step,
//! plant step, record.

use std::fmt;

use crate::controller::Controller;
use crate::error::{Error, Result};
use crate::harness::scenario::Scenario;
use crate::harness::trace::{Trace, TraceDims, TraceRow};
use crate::matnum::norm;
use crate::observer::{observer_step, reconstruct_with, ObserverState};
use crate::plant::{measure_output, plant_step, HistoryBuffer};
use crate::predictor::predict_x2;

/// A run that stopped early; `partial` holds every row recorded before
/// the failure.
#[derive(Debug)]
pub struct Aborted {
    pub reason: Error,
    pub partial: Trace,
}

impl fmt::Display for Aborted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} rows)", self.reason, self.partial.len())
    }
}

impl std::error::Error for Aborted {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.reason)
    }
}

pub fn run(scenario: &Scenario) -> Result<Trace, Aborted> {
    let dims = TraceDims {
        n1: scenario.model.n1(),
        p: scenario.model.p(),
        m: scenario.model.m(),
    };
    let mut trace = Trace::new(scenario.h, dims);
    match run_into(scenario, &mut trace) {
        Ok(()) => Ok(trace),
        Err(reason) => {
            log::warn!("run `{}` aborted: {reason}", scenario.label);
            Err(Aborted { reason, partial: trace })
        }
    }
}

fn run_into(sc: &Scenario, trace: &mut Trace) -> Result<()> {
    let model = &sc.model;
    let q = model.n1();
    let h = sc.h;
    let controller = Controller::new(model, sc.controller.clone())?;
    let steps = (sc.t_final / h).round() as usize;
    let mut buf = HistoryBuffer::with_constant_prehistory(&sc.x0, 0.0, h, sc.delay.tau_max)?;
    let mut x = sc.x0.clone();
    let mut obs = ObserverState::from_measurement(&x[..q]);
    trace.rows.reserve(steps + 1);

    for k in 0..=steps {
        let t = k as f64 * h;
        sc.delay.check_at(t)?;
        let d = sc.fault.eval(t);
        sc.fault.check(t, &d)?;
        let delta = sc.uncertainty.eval(&x, t);
        sc.uncertainty.check(t, &x, &delta)?;

        let y = measure_output(&buf, t, &sc.delay, model)?;
        let pred = predict_x2(&y, &buf, t, &sc.delay, model, h)?;
        let x_hat_2 = pred.x_hat_2;
        let (x1, x2) = model.split(&x);
        let ctl = controller.control(x1, &x_hat_2, &obs.xi_hat, t, &sc.delay)?;

        trace.rows.push(TraceRow {
            t,
            x1: x1.to_vec(),
            x2: x2.to_vec(),
            x1_hat: obs.x_hat_1.clone(),
            x2_hat: x_hat_2.clone(),
            x1_tilde: x1.iter().zip(&obs.x_hat_1).map(|(a, b)| a - b).collect(),
            x2_tilde: x2.iter().zip(&x_hat_2).map(|(a, b)| a - b).collect(),
            xi_hat: obs.xi_hat.clone(),
            d,
            d_hat: reconstruct_with(controller.b1_pinv(), &obs.xi_hat)?,
            delta_norm: norm(&delta),
            y,
            tau: pred.tau_used,
            s: ctl.s,
            u: ctl.u.clone(),
            u_d: ctl.u_d,
            u_nom: ctl.u_nom,
            u_sm: ctl.u_sm,
            rho: ctl.rho_used,
        });
        if k == steps {
            break;
        }

        obs = observer_step(&obs, x1, &x_hat_2, &ctl.u, model, &sc.gains, sc.signs, h).map_err(|e| match e {
            Error::Divergence { what, .. } => Error::Divergence { t: t + h, what },
            other => other,
        })?;
        x = plant_step(model, &x, t, h, &ctl.u, &sc.fault, &sc.uncertainty)?;
        let size = norm(&x);
        if size > sc.divergence_limit {
            return Err(Error::Divergence {
                t: t + h,
                what: format!("‖x‖ = {size:e} exceeds the limit {:e}", sc.divergence_limit),
            });
        }
        buf.push(x.clone());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::load_scenario;

    fn scenario(x0: &str, fault: &str, t_final: f64) -> Scenario {
        load_scenario(&format!(
            r#"{{
            "model": {{"A11": [[-1]], "A12": [[1]], "A21": [[-3]], "A22": [[1]], "B1": [[1]]}},
            "delay": {{"a": 0.4, "b": 0.1, "c": 1.0, "r_bar": 0.1, "tau_max": 0.5}},
            "fault": {fault},
            "observer": {{"k1": 5, "k2": 2, "k3": 5, "k4": 2}},
            "controller": {{"S2": [[-5]], "rho": {{"mode": "constant", "value": 2}}}},
            "sim": {{"x0": {x0}, "t_final": {t_final}, "h": 0.001}}
        }}"#
        ))
        .unwrap()
    }

    #[test]
    fn zero_scenario_gives_zero_trace() {
        let trace = run(&scenario("[0, 0]", "{}", 0.5)).unwrap();
        assert_eq!(trace.len(), 501);
        for row in &trace.rows {
            assert!(row.state().iter().all(|v| *v == 0.0));
            assert!(row.u.iter().chain(&row.s).chain(&row.xi_hat).all(|v| *v == 0.0));
        }
        trace.validate().unwrap();
    }

    #[test]
    fn first_row_follows_initial_conventions() {
        let trace = run(&scenario("[1, 1]", "{}", 0.01)).unwrap();
        let r0 = &trace.rows[0];
        assert_eq!(r0.y, vec![1.0]);
        assert_eq!(r0.x1_hat, vec![1.0]);
        assert_eq!(r0.xi_hat, vec![0.0]);
        assert_eq!(r0.tau, 0.4);
        // x̂₂(0) integrates the constant pre-history: e^{0.4} − 3(e^{0.4} − 1)
        let e = 0.4f64.exp();
        assert!((r0.x2_hat[0] - (e - 3.0 * (e - 1.0))).abs() < 1e-12);
        assert_eq!(trace.end_time(), 0.01);
    }

    #[test]
    fn divergence_keeps_partial_trace() {
        let mut sc = scenario("[1, 1]", "{}", 2.0);
        sc.divergence_limit = 1.05;
        let err = run(&sc).unwrap_err();
        assert!(matches!(err.reason, Error::Divergence { .. }), "{err}");
        assert!(!err.partial.is_empty());
        assert!(err.partial.len() < 2001);
    }

    #[test]
    fn fault_bound_violation_aborts() {
        let mut sc = scenario("[1, 1]", r#"{"terms": [{"amp": 0.1, "freq": 2, "kind": "sin"}], "alpha": 0.1}"#, 1.0);
        sc.fault.alpha = 0.05;
        let err = run(&sc).unwrap_err();
        assert!(matches!(err.reason, Error::AssumptionViolated { .. }), "{err}");
    }
}
