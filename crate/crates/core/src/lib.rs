//! Sliding mode control of linear plants with a time-varying measurement
//! delay: a predictor forwards the delayed output, a super-twisting
//! observer reconstructs the actuator fault, and a three-term sliding mode
//! law closes the loop.

pub mod analysis;
pub mod controller;
pub mod error;
pub mod harness;
pub mod matnum;
pub mod observer;
pub mod plant;
pub mod predictor;

pub use analysis::{audit, audit_trace, certify, corollary_bound, theorem_rho_coefficient, AuditSettings, CertificationReport, TraceAudit};
pub use controller::{control_law, Controller, ControllerConfig, ControlDecomposition, RhoMode, SignSmoothing};
pub use error::{Error, Result};
pub use harness::{load_scenario, load_scenario_file, run, Aborted, Scenario, Trace};
pub use matnum::Matrix;
pub use observer::{InjectionSigns, ObserverGains, ObserverState};
pub use plant::{DelayProfile, FaultSignal, HistoryBuffer, PlantModel, UncertaintyModel};
pub use predictor::{predict_x2, predict_x2_direct, PredictorOutput};
