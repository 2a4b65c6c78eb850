//! Open-loop predictor forwarding the delayed measurement of `x₂`.
//!
//! The current value is obtained from the variation-of-constants formula
//!
//! ```text
//! x̂₂(t) = e^{A₂₂τ} y(t) + ∫_{t−τ}^{t} e^{A₂₂(t−θ)} A₂₁ x₁(θ) dθ
//! ```
//!
//! [`predict_x2`] evaluates it by re-integrating `ż = A₂₂z + A₂₁x₁(θ)` over
//! the window; [`predict_x2_direct`] evaluates the integral literally by
//! trapezoidal quadrature and serves as a cross-check.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matnum::mat_exp;
use crate::plant::{DelayProfile, HistoryBuffer, PlantModel, UncertaintyModel};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictorOutput {
    pub x_hat_2: Vec<f64>,
    pub tau_used: f64,
    pub window_samples: usize,
}

/// Integration nodes from `t0` to `t1`: the endpoints plus every history
/// grid point strictly inside, each interval further split so that no
/// piece is longer than `max_step`.
fn window_nodes(buf: &HistoryBuffer, t0: f64, t1: f64, max_step: f64) -> Vec<f64> {
    let grid = buf.step();
    let tol = 1e-9 * grid;
    let mut coarse = vec![t0];
    let mut k = buf.grid_floor(t0) + 1;
    loop {
        let tk = buf.time_of(k);
        if tk >= t1 - tol {
            break;
        }
        if tk > t0 + tol {
            coarse.push(tk);
        }
        k += 1;
    }
    coarse.push(t1);
    if max_step >= grid {
        return coarse;
    }
    let mut nodes = vec![t0];
    for w in coarse.windows(2) {
        let pieces = ((w[1] - w[0]) / max_step - 1e-9).ceil().max(1.0) as usize;
        for i in 1..=pieces {
            nodes.push(w[0] + (w[1] - w[0]) * i as f64 / pieces as f64);
        }
    }
    nodes
}

fn check_inputs(y: &[f64], t: f64, delay: &DelayProfile, model: &PlantModel) -> Result<f64> {
    if y.len() != model.p() {
        return Err(Error::Dimension(format!(
            "measurement has {} entries, expected {}",
            y.len(),
            model.p()
        )));
    }
    let tau = delay.tau(t);
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("delay tau({t}) = {tau} is negative")));
    }
    Ok(tau)
}

/// Forwards `y = x₂(t − τ(t))` to the current time by RK4 integration of
/// the `x₂` subsystem driven by the recorded `x₁`, with step at most `h`.
pub fn predict_x2(
    y: &[f64],
    buf: &HistoryBuffer,
    t: f64,
    delay: &DelayProfile,
    model: &PlantModel,
    h: f64,
) -> Result<PredictorOutput> {
    let tau = check_inputs(y, t, delay, model)?;
    if tau == 0.0 {
        return Ok(PredictorOutput {
            x_hat_2: y.to_vec(),
            tau_used: 0.0,
            window_samples: 1,
        });
    }
    if !(h > 0.0) {
        return Err(Error::Domain(format!("predictor step {h} must be positive")));
    }
    let t0 = t - tau;
    if t0 < buf.start_time() - 1e-9 * buf.step() || t > buf.end_time() + 1e-9 * buf.step() {
        return Err(Error::HistoryUnderflow {
            t: t0,
            start: buf.start_time(),
            end: buf.end_time(),
        });
    }
    let nodes = window_nodes(buf, t0, t, h);
    let (q, p) = (model.n1(), model.p());

    let mut x = vec![0.0; model.n()];
    let mut x1_at = |theta: f64, out: &mut [f64]| -> Result<()> {
        buf.sample_into(theta, &mut x)?;
        out.copy_from_slice(&x[..q]);
        Ok(())
    };
    let rhs = |z: &[f64], x1: &[f64], out: &mut [f64]| -> Result<()> {
        out.fill(0.0);
        model.a22.mul_vec_acc(z, 1.0, out)?;
        model.a21.mul_vec_acc(x1, 1.0, out)
    };

    let mut z = y.to_vec();
    let (mut x1_lo, mut x1_mid, mut x1_hi) = (vec![0.0; q], vec![0.0; q], vec![0.0; q]);
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; p], vec![0.0; p], vec![0.0; p], vec![0.0; p]);
    let mut stage = vec![0.0; p];
    x1_at(nodes[0], &mut x1_lo)?;
    for w in nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        let dt = b - a;
        x1_at(0.5 * (a + b), &mut x1_mid)?;
        x1_at(b, &mut x1_hi)?;
        rhs(&z, &x1_lo, &mut k1)?;
        for i in 0..p {
            stage[i] = z[i] + 0.5 * dt * k1[i];
        }
        rhs(&stage, &x1_mid, &mut k2)?;
        for i in 0..p {
            stage[i] = z[i] + 0.5 * dt * k2[i];
        }
        rhs(&stage, &x1_mid, &mut k3)?;
        for i in 0..p {
            stage[i] = z[i] + dt * k3[i];
        }
        rhs(&stage, &x1_hi, &mut k4)?;
        for i in 0..p {
            z[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        std::mem::swap(&mut x1_lo, &mut x1_hi);
    }
    Ok(PredictorOutput {
        x_hat_2: z,
        tau_used: tau,
        window_samples: nodes.len() - 1,
    })
}

/// Literal evaluation of the prediction integral: `e^{A₂₂τ}y` plus the
/// trapezoidal rule over the history nodes, one matrix exponential per node.
pub fn predict_x2_direct(
    y: &[f64],
    buf: &HistoryBuffer,
    t: f64,
    delay: &DelayProfile,
    model: &PlantModel,
) -> Result<PredictorOutput> {
    let tau = check_inputs(y, t, delay, model)?;
    if tau == 0.0 {
        return Ok(PredictorOutput {
            x_hat_2: y.to_vec(),
            tau_used: 0.0,
            window_samples: 1,
        });
    }
    let nodes = window_nodes(buf, t - tau, t, buf.step());
    let q = model.n1();
    let integrand = |theta: f64| -> Result<Vec<f64>> {
        let x = buf.sample(theta)?;
        let forced = model.a21.mul_vec(&x[..q])?;
        mat_exp(&model.a22, t - theta)?.mul_vec(&forced)
    };
    let mut acc = mat_exp(&model.a22, tau)?.mul_vec(y)?;
    let mut f_lo = integrand(nodes[0])?;
    for w in nodes.windows(2) {
        let f_hi = integrand(w[1])?;
        let half = 0.5 * (w[1] - w[0]);
        for (a, (lo, hi)) in acc.iter_mut().zip(f_lo.iter().zip(&f_hi)) {
            *a += half * (lo + hi);
        }
        f_lo = f_hi;
    }
    Ok(PredictorOutput {
        x_hat_2: acc,
        tau_used: tau,
        window_samples: nodes.len() - 1,
    })
}

/// `‖e^{A₂₂τ}D₂‖` in the spectral norm.
pub fn leakage_gain(model: &PlantModel, tau: f64) -> Result<f64> {
    Ok((&mat_exp(&model.a22, tau)? * &model.d2).norm_2())
}

/// Upper bound `τ(t)·δ̄·‖e^{A₂₂τ(t)}D₂‖·sup‖x(θ)‖` on the prediction residual
/// caused by the uncertainty; `sup_norm_x` is taken over `[t − τ(t), t]`.
pub fn residual_bound(
    t: f64,
    delay: &DelayProfile,
    unc: &UncertaintyModel,
    model: &PlantModel,
    sup_norm_x: f64,
) -> Result<f64> {
    if !(sup_norm_x >= 0.0) {
        return Err(Error::Domain(format!("sup norm {sup_norm_x} must be >= 0")));
    }
    let tau = delay.tau(t);
    if !(tau >= 0.0) {
        return Err(Error::Domain(format!("delay tau({t}) = {tau} is negative")));
    }
    if tau == 0.0 || unc.delta_bar == 0.0 || sup_norm_x == 0.0 {
        return Ok(0.0);
    }
    Ok(tau * unc.delta_bar * leakage_gain(model, tau)? * sup_norm_x)
}
