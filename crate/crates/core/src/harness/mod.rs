//! Scenario files, the closed-loop simulation and trace I/O.

pub mod scenario;
pub mod sim;
pub mod trace;

pub use scenario::{load_scenario, load_scenario_file, Scenario, ScenarioDoc};
pub use sim::{run, Aborted};
pub use trace::{Trace, TraceDims, TraceRow};
