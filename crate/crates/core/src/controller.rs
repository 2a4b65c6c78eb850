//! Sliding surface, switching-gain schedule and the three-term control law
//! `u = −B₁†ξ̂ − (SB)⁻¹SA x̄ − ρ(SB)⁻¹ sign(s)` with `x̄ = (x₁, x̂₂)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matnum::{self, char_poly, inverse, norm, poly_from_roots, pseudo_inverse, solve_lyapunov, Matrix};
use crate::plant::{DelayProfile, PlantModel};
use crate::predictor::leakage_gain;

/// How the switching gain `ρ` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RhoMode {
    Constant(f64),
    /// `ρ = φ·δ̄·(1 + r̄)·‖e^{A₂₂τ(t)}D₂‖·inflation·‖x̄‖ + η`.
    ///
    /// `inflation` scales `‖x̄‖` to cover the unmeasured part of `‖x‖`.
    Scheduled {
        phi: f64,
        eta: f64,
        delta_bar: f64,
        inflation: f64,
    },
}

pub const DEFAULT_INFLATION: f64 = 1.2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum SignSmoothing {
    #[default]
    Ideal,
    /// `sign(sᵢ)` replaced by `clamp(sᵢ/ε, −1, 1)`.
    BoundaryLayer(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerConfig {
    pub s2: Matrix,
    pub rho: RhoMode,
    pub smoothing: SignSmoothing,
    /// Sliding band used when auditing; `None` selects the default.
    pub band: Option<f64>,
}

impl ControllerConfig {
    pub fn new(s2: Matrix, rho: RhoMode) -> Self {
        ControllerConfig {
            s2,
            rho,
            smoothing: SignSmoothing::Ideal,
            band: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ControlDecomposition {
    pub u: Vec<f64>,
    pub u_d: Vec<f64>,
    pub u_nom: Vec<f64>,
    pub u_sm: Vec<f64>,
    pub s: Vec<f64>,
    pub rho_used: f64,
}

/// `s = x₁ + S₂x̂₂`.
pub fn sliding_variable(x1: &[f64], x_hat_2: &[f64], cfg: &ControllerConfig) -> Result<Vec<f64>> {
    let mut s = x1.to_vec();
    cfg.s2.mul_vec_acc(x_hat_2, 1.0, &mut s)?;
    Ok(s)
}

/// `Ā₂₂ = A₂₂ − A₂₁S₂`, the dynamics of `x̂₂` on the surface.
pub fn reduced_dynamics(model: &PlantModel, s2: &Matrix) -> Result<Matrix> {
    Ok(&model.a22 - &model.a21.matmul(s2)?)
}

/// Pole placement for `S₂` so that `A₂₂ − A₂₁S₂` has the requested real
/// eigenvalues. Handled when either `x₂` or `x₁` is scalar.
pub fn design_surface(model: &PlantModel, desired: &[f64]) -> Result<Matrix> {
    let (q, p) = (model.n1(), model.p());
    if desired.len() != p {
        return Err(Error::Dimension(format!(
            "{} eigenvalues requested for a {p}-dimensional surface dynamics",
            desired.len()
        )));
    }
    if let Some(bad) = desired.iter().find(|l| !(**l < 0.0)) {
        return Err(Error::Domain(format!("eigenvalue {bad} is not in the open left half-plane")));
    }
    let s2 = if p == 1 {
        // A₂₁S₂ must equal A₂₂ − λ; take the minimum-norm solution.
        let a21 = &model.a21;
        let gram = a21.norm_fro().powi(2);
        if gram <= 1e-14 * (1.0 + model.a22.max_abs()) {
            return Err(Error::Uncontrollable("A21 is zero".into()));
        }
        a21.transpose().scale((model.a22[(0, 0)] - desired[0]) / gram)
    } else if q == 1 {
        // Ackermann: S₂ = e_pᵀ C⁻¹ Δ(A₂₂) with C = [A₂₁, A₂₂A₂₁, …]
        let mut ctrb = model.a21.clone();
        let mut col = model.a21.clone();
        for _ in 1..p {
            col = &model.a22 * &col;
            ctrb = ctrb.hstack(&col)?;
        }
        if matnum::rank(&ctrb) < p {
            return Err(Error::Uncontrollable("(A22, A21) is not controllable".into()));
        }
        let coeffs = poly_from_roots(desired);
        let mut delta = Matrix::zeros(p, p);
        let mut power = Matrix::identity(p);
        for c in coeffs.iter().rev() {
            delta = &delta + &power.scale(*c);
            power = &power * &model.a22;
        }
        let ctrb_inv = inverse(&ctrb)?;
        let mut last = Matrix::zeros(1, p);
        last[(0, p - 1)] = 1.0;
        &(&last * &ctrb_inv) * &delta
    } else {
        return Err(Error::Unsupported(format!(
            "pole placement for {q} measured and {p} delayed states; supply S2 directly"
        )));
    };

    let achieved = char_poly(&reduced_dynamics(model, &s2)?);
    let wanted = poly_from_roots(desired);
    for (a, w) in achieved.iter().zip(&wanted) {
        if (a - w).abs() > 1e-8 * w.abs().max(1.0) {
            return Err(Error::Uncontrollable(format!(
                "placement missed: characteristic coefficients {achieved:?} vs {wanted:?}"
            )));
        }
    }
    Ok(s2)
}

/// Switching gain. In scheduled mode `x_bar` stands in for the state norm.
pub fn rho_schedule(
    x_bar: &[f64],
    t: f64,
    delay: &DelayProfile,
    cfg: &ControllerConfig,
    model: &PlantModel,
) -> Result<f64> {
    match cfg.rho {
        RhoMode::Constant(rho) => Ok(rho),
        RhoMode::Scheduled {
            phi,
            eta,
            delta_bar,
            inflation,
        } => {
            if delta_bar == 0.0 {
                return Ok(eta);
            }
            let gain = leakage_gain(model, delay.tau(t))?;
            Ok(phi * delta_bar * (1.0 + delay.r_bar) * gain * inflation * norm(x_bar) + eta)
        }
    }
}

fn sign_vector(s: &[f64], smoothing: SignSmoothing) -> Vec<f64> {
    s.iter()
        .map(|&v| match smoothing {
            SignSmoothing::Ideal => {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            SignSmoothing::BoundaryLayer(eps) => (v / eps).clamp(-1.0, 1.0),
        })
        .collect()
}

/// Sliding mode controller with the surface quantities precomputed.
#[derive(Clone, Debug)]
pub struct Controller {
    cfg: ControllerConfig,
    model: PlantModel,
    sb_inv: Matrix,
    sa: Matrix,
    b1_pinv: Matrix,
}

impl Controller {
    /// Validates the configuration against the model: `SB` invertible,
    /// `Ā₂₂` Hurwitz and sane schedule parameters.
    pub fn new(model: &PlantModel, cfg: ControllerConfig) -> Result<Self> {
        let (q, p) = (model.n1(), model.p());
        if cfg.s2.shape() != (q, p) {
            return Err(Error::Dimension(format!(
                "S2 is {}x{}, expected {q}x{p}",
                cfg.s2.rows(),
                cfg.s2.cols()
            )));
        }
        let s = Matrix::identity(q).hstack(&cfg.s2)?;
        let sb = &s * &model.b();
        if !sb.is_square() {
            return Err(Error::Unsupported(format!(
                "SB is {}x{}; the control law needs m = n - p",
                sb.rows(),
                sb.cols()
            )));
        }
        let sb_inv = inverse(&sb).map_err(|_| Error::SingularSurface)?;
        solve_lyapunov(&reduced_dynamics(model, &cfg.s2)?)?;
        match cfg.rho {
            RhoMode::Constant(rho) if !(rho > 0.0) => {
                return Err(Error::Domain(format!("rho = {rho} must be positive")));
            }
            RhoMode::Scheduled {
                phi,
                eta,
                delta_bar,
                inflation,
            } => {
                if !(phi > 1.0) || !(eta > 0.0) || !(delta_bar >= 0.0) || !(inflation >= 1.0) {
                    return Err(Error::Domain(format!(
                        "schedule needs phi > 1, eta > 0, delta_bar >= 0, inflation >= 1; got {phi}, {eta}, {delta_bar}, {inflation}"
                    )));
                }
            }
            _ => {}
        }
        if let SignSmoothing::BoundaryLayer(eps) = cfg.smoothing {
            if !(eps > 0.0) {
                return Err(Error::Domain(format!("boundary layer {eps} must be positive")));
            }
        }
        Ok(Controller {
            sa: &s * &model.a(),
            sb_inv,
            b1_pinv: pseudo_inverse(&model.b1)?,
            model: model.clone(),
            cfg,
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    /// `SA` as used by the equivalent control.
    pub fn sa(&self) -> &Matrix {
        &self.sa
    }

    pub fn b1_pinv(&self) -> &Matrix {
        &self.b1_pinv
    }

    pub fn control(
        &self,
        x1: &[f64],
        x_hat_2: &[f64],
        xi_hat: &[f64],
        t: f64,
        delay: &DelayProfile,
    ) -> Result<ControlDecomposition> {
        let x_bar: Vec<f64> = x1.iter().chain(x_hat_2).copied().collect();
        let s = sliding_variable(x1, x_hat_2, &self.cfg)?;
        let rho = rho_schedule(&x_bar, t, delay, &self.cfg, &self.model)?;

        let u_d = self.b1_pinv.mul_vec(xi_hat)?.iter().map(|v| -v).collect::<Vec<_>>();
        let sa_x = self.sa.mul_vec(&x_bar)?;
        let u_nom: Vec<f64> = self.sb_inv.mul_vec(&sa_x)?.iter().map(|v| -v).collect();
        let sgn = sign_vector(&s, self.cfg.smoothing);
        let u_sm: Vec<f64> = self.sb_inv.mul_vec(&sgn)?.iter().map(|v| -rho * v).collect();
        let u = u_d
            .iter()
            .zip(&u_nom)
            .zip(&u_sm)
            .map(|((a, b), c)| a + b + c)
            .collect();
        Ok(ControlDecomposition {
            u,
            u_d,
            u_nom,
            u_sm,
            s,
            rho_used: rho,
        })
    }
}

/// Free-function form of [`Controller::control`]; validates the
/// configuration on every call.
pub fn control_law(
    x1: &[f64],
    x_hat_2: &[f64],
    xi_hat: &[f64],
    t: f64,
    delay: &DelayProfile,
    cfg: &ControllerConfig,
    model: &PlantModel,
) -> Result<ControlDecomposition> {
    Controller::new(model, cfg.clone())?.control(x1, x_hat_2, xi_hat, t, delay)
}
