//! Stability certificate for a configured loop and a-posteriori audit of
//! recorded traces.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::controller::{reduced_dynamics, ControllerConfig, RhoMode, DEFAULT_INFLATION};
use crate::error::{Error, Result};
use crate::harness::trace::{settle_time, Trace};
use crate::harness::Scenario;
use crate::matnum::{norm, solve_lyapunov, symmetric_eigenvalues, Matrix};
use crate::plant::{DelayProfile, PlantModel, UncertaintyModel};
use crate::predictor::{leakage_gain, residual_bound};

/// Points of the uniform τ grid used to maximize `‖e^{A₂₂τ}D₂‖`.
pub const TAU_GRID: usize = 1000;

pub const DEFAULT_PHI: f64 = 1.05;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificationReport {
    /// Solution of `Ā₂₂ᵀP₂ + P₂Ā₂₂ = −I`; absent when `Ā₂₂` is not Hurwitz.
    pub p2: Option<Matrix>,
    pub lambda_max_p2: Option<f64>,
    pub mu: Option<f64>,
    pub beta1: Option<f64>,
    /// `None` means unbounded (no leakage into the `x₂` channel).
    pub delta_bar_max: Option<f64>,
    pub delta_bar: f64,
    pub phi: f64,
    pub max_leakage_gain: f64,
    pub rho_required_norm_coeff: f64,
    pub feasible: bool,
    pub margins: BTreeMap<String, f64>,
}

/// `max_{τ ∈ [0, τ_max]} ‖e^{A₂₂τ}D₂‖` over `TAU_GRID` uniform points.
pub fn max_leakage_gain(model: &PlantModel, tau_max: f64) -> Result<f64> {
    if !(tau_max >= 0.0) {
        return Err(Error::Domain(format!("tau_max = {tau_max} must be >= 0")));
    }
    let mut best: f64 = 0.0;
    for i in 0..TAU_GRID {
        let tau = tau_max * i as f64 / (TAU_GRID - 1) as f64;
        best = best.max(leakage_gain(model, tau)?);
    }
    Ok(best)
}

fn check_phi(phi: f64) -> Result<()> {
    if phi > 1.0 && phi.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("phi = {phi} must exceed 1")))
    }
}

/// Coefficient of `‖x‖` in the sliding-mode gain requirement,
/// `φ·δ̄·(1 + r̄)·max_τ ‖e^{A₂₂τ}D₂‖`.
pub fn theorem_rho_coefficient(
    model: &PlantModel,
    delay: &DelayProfile,
    unc: &UncertaintyModel,
    phi: f64,
) -> Result<f64> {
    check_phi(phi)?;
    if unc.delta_bar == 0.0 {
        return Ok(0.0);
    }
    Ok(phi * unc.delta_bar * (1.0 + delay.r_bar) * max_leakage_gain(model, delay.tau_max)?)
}

/// Largest admissible `δ̄` for asymptotic stability on the surface,
/// `1 / (2φ λmax(P₂)(1 + r̄)√(1 + ‖S₂‖²)·max_τ ‖e^{A₂₂τ}D₂‖)`.
///
/// A non-Hurwitz `Ā₂₂` yields an infeasible report rather than an error.
pub fn corollary_bound(
    model: &PlantModel,
    s2: &Matrix,
    delay: &DelayProfile,
    phi: f64,
    delta_bar: f64,
) -> Result<CertificationReport> {
    check_phi(phi)?;
    if !(delta_bar >= 0.0) {
        return Err(Error::Domain(format!("delta_bar = {delta_bar} must be >= 0")));
    }
    let gain = max_leakage_gain(model, delay.tau_max)?;
    let coeff = if delta_bar == 0.0 {
        0.0
    } else {
        phi * delta_bar * (1.0 + delay.r_bar) * gain
    };
    let surface = (1.0 + s2.norm_2().powi(2)).sqrt();
    let mut margins = BTreeMap::new();
    margins.insert("surface_factor".to_string(), surface);

    let p2 = match solve_lyapunov(&reduced_dynamics(model, s2)?) {
        Ok(p2) => p2,
        Err(Error::NotHurwitz) => {
            return Ok(CertificationReport {
                p2: None,
                lambda_max_p2: None,
                mu: None,
                beta1: None,
                delta_bar_max: Some(0.0),
                delta_bar,
                phi,
                max_leakage_gain: gain,
                rho_required_norm_coeff: coeff,
                feasible: false,
                margins,
            });
        }
        Err(e) => return Err(e),
    };
    let lambda_max = symmetric_eigenvalues(&p2).last().copied().unwrap_or(0.0);
    let mu = 1.0 / lambda_max;
    // decay rate of ‖ζ₂‖ on the surface before the uncertainty term
    let beta1 = mu / 2.0;
    let delta_bar_max = if gain == 0.0 {
        None
    } else {
        Some(1.0 / (2.0 * phi * lambda_max * (1.0 + delay.r_bar) * surface * gain))
    };
    let feasible = delta_bar_max.is_none_or(|m| delta_bar < m);
    if let Some(m) = delta_bar_max {
        margins.insert("delta_bar_ratio".to_string(), delta_bar / m);
    }
    Ok(CertificationReport {
        p2: Some(p2),
        lambda_max_p2: Some(lambda_max),
        mu: Some(mu),
        beta1: Some(beta1),
        delta_bar_max,
        delta_bar,
        phi,
        max_leakage_gain: gain,
        rho_required_norm_coeff: coeff,
        feasible,
        margins,
    })
}

/// Knobs of [`audit_trace`].
#[derive(Clone, Debug, PartialEq)]
pub struct AuditSettings {
    pub phi: f64,
    /// Start of the fault reconstruction window.
    pub fault_window_start: f64,
    /// `|x̃₁|` level that counts as observer convergence.
    pub observer_band: Option<f64>,
    /// Relative slack on `η` in the discrete Lyapunov test.
    pub slack: f64,
    /// Absolute allowance on `‖x̃₂‖` for integration error; `None`
    /// selects `10·h²`.
    pub residual_abs_tol: Option<f64>,
}

impl Default for AuditSettings {
    fn default() -> Self {
        AuditSettings {
            phi: DEFAULT_PHI,
            fault_window_start: 5.0,
            observer_band: None,
            slack: 0.1,
            residual_abs_tol: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceAudit {
    pub sliding_reach_time: Option<f64>,
    pub sliding_band: f64,
    pub max_residual_ratio: f64,
    pub residual_samples: usize,
    pub max_fault_error: f64,
    pub fault_window_start: f64,
    pub observer_band: f64,
    pub observer_settle_time: Option<f64>,
    pub lyapunov_window_start: Option<f64>,
    pub lyapunov_checked: usize,
    pub lyapunov_skipped: usize,
    pub lyapunov_violations: usize,
    pub zeta1_max: f64,
    pub zeta2_max: f64,
}

impl TraceAudit {
    pub fn passed(&self) -> bool {
        self.sliding_reach_time.is_some()
            && self.observer_settle_time.is_some()
            && self.max_residual_ratio <= 1.05
            && self.lyapunov_violations == 0
    }
}

/// Chattering band for reach detection: the configured one or
/// `max(0.01, 10·h·ρ)` with the last recorded `ρ`, which sets the
/// steady-state chattering amplitude.
pub fn default_band(trace: &Trace, cfg: &ControllerConfig) -> f64 {
    cfg.band.unwrap_or_else(|| {
        let rho = trace.rows.last().map_or(0.0, |r| r.rho);
        (10.0 * trace.step * rho).max(0.01)
    })
}

pub fn audit_trace(
    trace: &Trace,
    model: &PlantModel,
    delay: &DelayProfile,
    unc: &UncertaintyModel,
    cfg: &ControllerConfig,
    settings: &AuditSettings,
) -> Result<TraceAudit> {
    trace.validate()?;
    check_phi(settings.phi)?;
    let dims = trace.dims;
    if (dims.n1, dims.p, dims.m) != (model.n1(), model.p(), model.m()) {
        return Err(Error::Format(format!(
            "trace widths {}/{}/{} do not match the model",
            dims.n1, dims.p, dims.m
        )));
    }
    let h = trace.step;
    let rows = &trace.rows;
    let band = default_band(trace, cfg);
    let observer_band = settings.observer_band.unwrap_or((5.0 * h).max(5e-3));
    let t0 = trace.start_time();
    let residual_tol = settings.residual_abs_tol.unwrap_or(10.0 * h * h);

    // ζ₁ is the matched lumped disturbance, ζ₂ the x₂-channel leakage.
    let mut zeta1_max: f64 = 0.0;
    let mut zeta2_max: f64 = 0.0;
    for row in rows {
        let x = row.state();
        let delta = unc.eval(&x, row.t);
        let mut z1 = model.b1.mul_vec(&row.d)?;
        model.d1.mul_vec_acc(&delta, 1.0, &mut z1)?;
        zeta1_max = zeta1_max.max(norm(&z1));
        let lag = row.t - row.tau;
        let x_lag = trace.state_at(lag);
        let delta_lag = unc.eval(&x_lag, lag);
        let g = crate::matnum::mat_exp(&model.a22, row.tau)?;
        let z2 = (&g * &model.d2).mul_vec(&delta_lag)?;
        zeta2_max = zeta2_max.max((1.0 - delay.tau_dot(row.t)) * norm(&z2));
    }

    // Residual bound with the windowed sup over [t − τ, t].
    let norms: Vec<f64> = rows.iter().map(|r| norm(&r.state())).collect();
    let mut max_ratio: f64 = 0.0;
    let mut residual_samples = 0;
    for (k, row) in rows.iter().enumerate() {
        let lag = row.t - row.tau;
        if lag < t0 - 1e-12 {
            continue;
        }
        let lo = (((lag - t0) / h).floor().max(0.0) as usize).min(k);
        let sup = norms[lo..=k].iter().fold(0.0f64, |m, v| m.max(*v));
        let bound = residual_bound(row.t, delay, unc, model, sup)?;
        let excess = (norm(&row.x2_tilde) - residual_tol).max(0.0);
        let ratio = if excess == 0.0 {
            0.0
        } else if bound == 0.0 {
            f64::INFINITY
        } else {
            excess / bound
        };
        max_ratio = max_ratio.max(ratio);
        residual_samples += 1;
    }

    let max_fault_error = rows
        .iter()
        .filter(|r| r.t >= settings.fault_window_start)
        .map(|r| norm(&r.d.iter().zip(&r.d_hat).map(|(a, b)| a - b).collect::<Vec<_>>()))
        .fold(0.0, f64::max);

    let observer_settle_time = settle_time(rows, observer_band, |r| &r.x1_tilde);
    let predictor_ready = rows.iter().find(|r| r.t - r.tau >= t0).map(|r| r.t);
    // an observer that never settles leaves the window open from the
    // predictor start, so a diverging run still reports its violations
    let lyapunov_window_start = predictor_ready.map(|b| observer_settle_time.map_or(b, |a| a.max(b)));

    let (phi, inflation) = match cfg.rho {
        RhoMode::Scheduled { phi, inflation, .. } => (phi, inflation),
        RhoMode::Constant(_) => (settings.phi, DEFAULT_INFLATION),
    };
    let mut checked = 0;
    let mut skipped = 0;
    let mut violations = 0;
    if let Some(start) = lyapunov_window_start {
        for pair in rows.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.t < start || a.s.iter().all(|v| v.abs() <= band) {
                continue;
            }
            let coeff = if unc.delta_bar == 0.0 {
                0.0
            } else {
                phi * unc.delta_bar * (1.0 + delay.r_bar) * leakage_gain(model, a.tau)?
            };
            let eta = a.rho - coeff * inflation * norm(&a.x_bar());
            if eta <= 0.0 {
                skipped += 1;
                continue;
            }
            checked += 1;
            let s_norm = norm(&a.s);
            let dv = 0.5 * (norm(&b.s).powi(2) - s_norm.powi(2));
            if dv >= -eta * s_norm * h * (1.0 - settings.slack) {
                violations += 1;
            }
        }
    }

    Ok(TraceAudit {
        sliding_reach_time: trace.reach_time(band),
        sliding_band: band,
        max_residual_ratio: max_ratio,
        residual_samples,
        max_fault_error,
        fault_window_start: settings.fault_window_start,
        observer_band,
        observer_settle_time,
        lyapunov_window_start,
        lyapunov_checked: checked,
        lyapunov_skipped: skipped,
        lyapunov_violations: violations,
        zeta1_max,
        zeta2_max,
    })
}

/// [`corollary_bound`] for a loaded scenario, with the coefficient of
/// [`theorem_rho_coefficient`] filled in.
pub fn certify(scenario: &Scenario, phi: f64) -> Result<CertificationReport> {
    corollary_bound(
        &scenario.model,
        &scenario.controller.s2,
        &scenario.delay,
        phi,
        scenario.uncertainty.delta_bar,
    )
}

/// [`audit_trace`] against a loaded scenario.
pub fn audit(scenario: &Scenario, trace: &Trace, settings: &AuditSettings) -> Result<TraceAudit> {
    audit_trace(
        trace,
        &scenario.model,
        &scenario.delay,
        &scenario.uncertainty,
        &scenario.controller,
        settings,
    )
}
