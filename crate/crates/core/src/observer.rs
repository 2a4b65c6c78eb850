//! Super-Twisting observer for the measured block and the lumped
//! disturbance acting on it.
//!
//! With `x̃₁ = x₁ − x̂₁` the observer is
//!
//! ```text
//! x̂₁' = A₁₁x̂₁ + A₁₂x̂₂ + B₁u + ν
//! ν    = k₁ x̃₁/‖x̃₁‖^{1/2} + k₂ x̃₁ + ξ̂
//! ξ̂'  = k₃ x̃₁/‖x̃₁‖ + k₄ x̃₁
//! ```
//!
//! so that the error obeys `x̃₁' = A₁₁x̃₁ + (B₁d + D₁δ + A₁₂x̃₂ − ξ̂) − k₁… − k₂x̃₁`
//! and `ξ̂` converges to the lumped term `B₁d + D₁δ + A₁₂x̃₂`.
//! [`InjectionSigns::Literal`] flips the signs of the `k₁`, `k₃`, `k₄` terms.
//! With that pattern the error dynamics are not stabilized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matnum::{norm, pseudo_inverse, Matrix};
use crate::plant::PlantModel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObserverGains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
}

impl ObserverGains {
    pub fn new(k1: f64, k2: f64, k3: f64, k4: f64) -> Result<Self> {
        let g = ObserverGains { k1, k2, k3, k4 };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, k) in [("k1", self.k1), ("k2", self.k2), ("k3", self.k3), ("k4", self.k4)] {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::Domain(format!("observer gain {name} = {k} must be positive")));
            }
        }
        Ok(())
    }
}

impl Default for ObserverGains {
    fn default() -> Self {
        ObserverGains {
            k1: 5.0,
            k2: 2.0,
            k3: 5.0,
            k4: 2.0,
        }
    }
}

/// Sign pattern of the output injection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum InjectionSigns {
    /// Stabilizing generalized super-twisting injection.
    #[default]
    Standard,
    /// `ν = −k₁x̃₁/‖x̃₁‖^{1/2} + k₂x̃₁ + ξ̂`, `ξ̂' = −k₃x̃₁/‖x̃₁‖ − k₄x̃₁`.
    Literal,
}

impl InjectionSigns {
    fn signs(self) -> (f64, f64, f64, f64) {
        match self {
            InjectionSigns::Standard => (1.0, 1.0, 1.0, 1.0),
            InjectionSigns::Literal => (-1.0, 1.0, -1.0, -1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObserverState {
    pub x_hat_1: Vec<f64>,
    pub xi_hat: Vec<f64>,
}

impl ObserverState {
    /// `x̂₁(0) = x₁(0)` and a zero disturbance estimate.
    pub fn from_measurement(x1: &[f64]) -> Self {
        ObserverState {
            x_hat_1: x1.to_vec(),
            xi_hat: vec![0.0; x1.len()],
        }
    }
}

/// `v/‖v‖^power`, defined as zero at `v = 0`.
fn normalized(v: &[f64], power: f64) -> Vec<f64> {
    let n = norm(v);
    if n == 0.0 {
        return vec![0.0; v.len()];
    }
    let s = n.powf(power);
    v.iter().map(|x| x / s).collect()
}

/// Output injection `ν` for the error `x̃₁ = x₁ − x̂₁`.
pub fn sta_injection(
    tilde_x1: &[f64],
    gains: &ObserverGains,
    xi_hat: &[f64],
    signs: InjectionSigns,
) -> Vec<f64> {
    let (s1, s2, _, _) = signs.signs();
    let root = normalized(tilde_x1, 0.5);
    tilde_x1
        .iter()
        .zip(&root)
        .zip(xi_hat)
        .map(|((e, r), xi)| s1 * gains.k1 * r + s2 * gains.k2 * e + xi)
        .collect()
}

/// Right-hand side of the `ξ̂` equation.
pub fn xi_rate(tilde_x1: &[f64], gains: &ObserverGains, signs: InjectionSigns) -> Vec<f64> {
    let (_, _, s3, s4) = signs.signs();
    let unit = normalized(tilde_x1, 1.0);
    tilde_x1
        .iter()
        .zip(&unit)
        .map(|(e, u)| s3 * gains.k3 * u + s4 * gains.k4 * e)
        .collect()
}

/// One explicit Euler step of the observer with the error frozen at the
/// start of the step.
pub fn observer_step(
    state: &ObserverState,
    x1: &[f64],
    x_hat_2: &[f64],
    u: &[f64],
    model: &PlantModel,
    gains: &ObserverGains,
    signs: InjectionSigns,
    h: f64,
) -> Result<ObserverState> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("observer step h = {h} must be positive")));
    }
    let q = model.n1();
    if x1.len() != q || state.x_hat_1.len() != q || state.xi_hat.len() != q {
        return Err(Error::Dimension(format!("observer vectors must have length {q}")));
    }
    let tilde: Vec<f64> = x1.iter().zip(&state.x_hat_1).map(|(a, b)| a - b).collect();
    let nu = sta_injection(&tilde, gains, &state.xi_hat, signs);

    let mut rate = nu;
    model.a11.mul_vec_acc(&state.x_hat_1, 1.0, &mut rate)?;
    model.a12.mul_vec_acc(x_hat_2, 1.0, &mut rate)?;
    model.b1.mul_vec_acc(u, 1.0, &mut rate)?;
    let xi_dot = xi_rate(&tilde, gains, signs);

    let next = ObserverState {
        x_hat_1: state.x_hat_1.iter().zip(&rate).map(|(x, r)| x + h * r).collect(),
        xi_hat: state.xi_hat.iter().zip(&xi_dot).map(|(x, r)| x + h * r).collect(),
    };
    if next.x_hat_1.iter().chain(&next.xi_hat).any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            t: f64::NAN,
            what: "observer state is not finite".into(),
        });
    }
    Ok(next)
}

/// Fault estimate `d̂ = B₁†ξ̂`.
pub fn reconstruct_fault(xi_hat: &[f64], model: &PlantModel) -> Result<Vec<f64>> {
    pseudo_inverse(&model.b1)?.mul_vec(xi_hat)
}

/// Same as [`reconstruct_fault`] with a precomputed pseudo-inverse.
pub fn reconstruct_with(b1_pinv: &Matrix, xi_hat: &[f64]) -> Result<Vec<f64>> {
    b1_pinv.mul_vec(xi_hat)
}
