//! JSON scenario documents and their validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::{Controller, ControllerConfig, RhoMode, SignSmoothing, DEFAULT_INFLATION};
use crate::error::{Error, Result};
use crate::matnum::{norm, Matrix};
use crate::observer::{InjectionSigns, ObserverGains};
use crate::plant::{DelayProfile, FaultSignal, PlantModel, UncertaintyModel};

pub const DEFAULT_DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default)]
    pub label: String,
    pub model: ModelDoc,
    pub delay: DelayDoc,
    #[serde(default)]
    pub fault: FaultDoc,
    #[serde(default)]
    pub uncertainty: Option<UncertaintyDoc>,
    pub observer: ObserverDoc,
    pub controller: ControllerDoc,
    pub sim: SimDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    #[serde(rename = "A11")]
    pub a11: Matrix,
    #[serde(rename = "A12")]
    pub a12: Matrix,
    #[serde(rename = "A21")]
    pub a21: Matrix,
    #[serde(rename = "A22")]
    pub a22: Matrix,
    #[serde(rename = "B1")]
    pub b1: Matrix,
    #[serde(rename = "D1", default)]
    pub d1: Option<Matrix>,
    #[serde(rename = "D2", default)]
    pub d2: Option<Matrix>,
}

/// `τ(t) = a + b·sin(c·t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayDoc {
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub c: f64,
    pub r_bar: f64,
    pub tau_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveKind {
    Sin,
    Cos,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultTerm {
    pub amp: f64,
    pub freq: f64,
    #[serde(default)]
    pub phase: f64,
    pub kind: WaveKind,
    #[serde(default)]
    pub channel: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultDoc {
    #[serde(default)]
    pub terms: Vec<FaultTerm>,
    #[serde(default)]
    pub alpha: f64,
}

/// `δ(x, t) = G x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyDoc {
    #[serde(rename = "G")]
    pub g: Matrix,
    pub delta_bar: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverDoc {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    #[serde(default)]
    pub paper_literal_signs: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum RhoDoc {
    Constant {
        value: f64,
    },
    Scheduled {
        phi: f64,
        eta: f64,
        #[serde(default)]
        inflation: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerDoc {
    #[serde(rename = "S2")]
    pub s2: Matrix,
    pub rho: RhoDoc,
    #[serde(default)]
    pub band: Option<f64>,
    #[serde(default)]
    pub boundary_layer: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimDoc {
    pub x0: Vec<f64>,
    pub t_final: f64,
    pub h: f64,
    #[serde(default)]
    pub divergence_limit: Option<f64>,
}

/// A validated closed-loop setup.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub label: String,
    pub model: PlantModel,
    pub delay: DelayProfile,
    pub fault: FaultSignal,
    pub uncertainty: UncertaintyModel,
    pub gains: ObserverGains,
    pub signs: InjectionSigns,
    pub controller: ControllerConfig,
    pub x0: Vec<f64>,
    pub t_final: f64,
    pub h: f64,
    pub divergence_limit: f64,
}

impl Scenario {
    /// Re-checks everything `load_scenario` checks; for programmatic edits.
    pub fn validate(&self) -> Result<()> {
        self.model.check_structure()?;
        if self.x0.len() != self.model.n() {
            return Err(Error::schema(
                "sim.x0",
                format!("has {} entries, model has n = {}", self.x0.len(), self.model.n()),
            ));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::schema("sim.h", format!("{} must be positive", self.h)));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::schema("sim.t_final", format!("{} must be positive", self.t_final)));
        }
        if !(self.divergence_limit > 0.0) {
            return Err(Error::schema("sim.divergence_limit", "must be positive"));
        }
        self.gains.validate()?;
        Controller::new(&self.model, self.controller.clone())?;
        Ok(())
    }
}

pub fn load_scenario(text: &str) -> Result<Scenario> {
    let doc: ScenarioDoc = serde_json::from_str(text)?;
    doc.build()
}

pub fn load_scenario_file(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_scenario(&text)
}

fn finite_matrix(path: &str, m: &Matrix) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::schema(path, "contains non-finite entries"))
    }
}

fn with_path<T>(path: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Dimension(msg) | Error::Domain(msg) => Error::schema(path, msg),
        other => other,
    })
}

impl ScenarioDoc {
    pub fn build(&self) -> Result<Scenario> {
        let model = self.build_model()?;
        model.check_structure()?;
        let delay = self.build_delay()?;
        let fault = self.build_fault(model.m())?;
        let uncertainty = self.build_uncertainty(model.n(), model.h())?;

        let o = &self.observer;
        let gains = with_path("observer", ObserverGains::new(o.k1, o.k2, o.k3, o.k4))?;
        let signs = if o.paper_literal_signs {
            InjectionSigns::Literal
        } else {
            InjectionSigns::Standard
        };

        let c = &self.controller;
        finite_matrix("controller.S2", &c.s2)?;
        let rho = match c.rho {
            RhoDoc::Constant { value } => RhoMode::Constant(value),
            RhoDoc::Scheduled { phi, eta, inflation } => RhoMode::Scheduled {
                phi,
                eta,
                delta_bar: uncertainty.delta_bar,
                inflation: inflation.unwrap_or(DEFAULT_INFLATION),
            },
        };
        if let Some(band) = c.band {
            if !(band > 0.0) {
                return Err(Error::schema("controller.band", format!("{band} must be positive")));
            }
        }
        let cfg = ControllerConfig {
            s2: c.s2.clone(),
            rho,
            smoothing: c.boundary_layer.map_or(SignSmoothing::Ideal, SignSmoothing::BoundaryLayer),
            band: c.band,
        };
        with_path("controller", Controller::new(&model, cfg.clone()))?;

        let sim = &self.sim;
        let scenario = Scenario {
            label: self.label.clone(),
            model,
            delay,
            fault,
            uncertainty,
            gains,
            signs,
            controller: cfg,
            x0: sim.x0.clone(),
            t_final: sim.t_final,
            h: sim.h,
            divergence_limit: sim.divergence_limit.unwrap_or(DEFAULT_DIVERGENCE_LIMIT),
        };
        if scenario.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::schema("sim.x0", "contains non-finite entries"));
        }
        scenario.validate()?;
        Ok(scenario)
    }

    fn build_model(&self) -> Result<PlantModel> {
        let m = &self.model;
        for (path, mat) in [
            ("model.A11", &m.a11),
            ("model.A12", &m.a12),
            ("model.A21", &m.a21),
            ("model.A22", &m.a22),
            ("model.B1", &m.b1),
        ] {
            finite_matrix(path, mat)?;
        }
        let (q, p) = (m.a11.rows(), m.a22.rows());
        let h = q + p;
        let d1 = m.d1.clone().unwrap_or_else(|| Matrix::zeros(q, h));
        let d2 = m.d2.clone().unwrap_or_else(|| Matrix::zeros(p, d1.cols()));
        finite_matrix("model.D1", &d1)?;
        finite_matrix("model.D2", &d2)?;
        with_path(
            "model",
            PlantModel::new(
                m.a11.clone(),
                m.a12.clone(),
                m.a21.clone(),
                m.a22.clone(),
                m.b1.clone(),
                d1,
                d2,
            ),
        )
    }

    fn build_delay(&self) -> Result<DelayProfile> {
        let d = &self.delay;
        if ![d.a, d.b, d.c, d.r_bar, d.tau_max].iter().all(|v| v.is_finite()) {
            return Err(Error::schema("delay", "parameters must be finite"));
        }
        if !(d.r_bar >= 0.0 && d.r_bar < 1.0) {
            return Err(Error::schema("delay.r_bar", format!("{} must lie in [0, 1)", d.r_bar)));
        }
        if d.a - d.b.abs() < 0.0 {
            return Err(Error::schema(
                "delay",
                format!("a - |b| = {} makes the delay negative", d.a - d.b.abs()),
            ));
        }
        if d.a + d.b.abs() > d.tau_max {
            return Err(Error::schema(
                "delay.tau_max",
                format!("{} is below the delay peak a + |b| = {}", d.tau_max, d.a + d.b.abs()),
            ));
        }
        if (d.b * d.c).abs() > d.r_bar {
            return Err(Error::schema(
                "delay.r_bar",
                format!("{} is below the delay rate peak |b c| = {}", d.r_bar, (d.b * d.c).abs()),
            ));
        }
        with_path("delay", DelayProfile::sinusoidal(d.a, d.b, d.c, d.tau_max, d.r_bar))
    }

    fn build_fault(&self, m: usize) -> Result<FaultSignal> {
        let f = &self.fault;
        if !(f.alpha >= 0.0) || !f.alpha.is_finite() {
            return Err(Error::schema("fault.alpha", format!("{} must be >= 0", f.alpha)));
        }
        let mut peak = vec![0.0; m];
        for (i, term) in f.terms.iter().enumerate() {
            let path = format!("fault.terms[{i}]");
            if term.channel >= m {
                return Err(Error::schema(
                    format!("{path}.channel"),
                    format!("{} is out of range for m = {m}", term.channel),
                ));
            }
            if ![term.amp, term.freq, term.phase].iter().all(|v| v.is_finite()) {
                return Err(Error::schema(path, "parameters must be finite"));
            }
            peak[term.channel] += term.amp.abs();
        }
        // the amplitude sum bounds every channel, so ‖d‖ ≤ ‖peak‖
        if norm(&peak) > f.alpha * (1.0 + 1e-12) {
            return Err(Error::schema(
                "fault.alpha",
                format!("{} is below the fault amplitude bound {}", f.alpha, norm(&peak)),
            ));
        }
        let terms = f.terms.clone();
        Ok(FaultSignal::new(
            move |t| {
                let mut d = vec![0.0; m];
                for term in &terms {
                    let arg = term.freq * t + term.phase;
                    d[term.channel] += term.amp
                        * match term.kind {
                            WaveKind::Sin => arg.sin(),
                            WaveKind::Cos => arg.cos(),
                        };
                }
                d
            },
            f.alpha,
        ))
    }

    fn build_uncertainty(&self, n: usize, h: usize) -> Result<UncertaintyModel> {
        let Some(u) = &self.uncertainty else {
            return Ok(UncertaintyModel::zero(h));
        };
        finite_matrix("uncertainty.G", &u.g)?;
        if u.g.shape() != (h, n) {
            return Err(Error::schema(
                "uncertainty.G",
                format!("is {}x{}, expected {h}x{n}", u.g.rows(), u.g.cols()),
            ));
        }
        if !(u.delta_bar >= 0.0) || !u.delta_bar.is_finite() {
            return Err(Error::schema("uncertainty.delta_bar", format!("{} must be >= 0", u.delta_bar)));
        }
        let gain = u.g.norm_2();
        if gain > u.delta_bar * (1.0 + 1e-12) {
            return Err(Error::schema(
                "uncertainty.delta_bar",
                format!("{} is below ‖G‖ = {gain}", u.delta_bar),
            ));
        }
        Ok(UncertaintyModel::linear(u.g.clone(), u.delta_bar))
    }
}
