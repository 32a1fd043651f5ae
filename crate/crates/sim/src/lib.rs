//! Simulation harness, experiment grid and reporting for firetrack.

pub mod config;
pub mod experiments;
pub mod oracle;
pub mod plot;
pub mod scenario;

pub use config::ScenarioConfig;
pub use experiments::{run_experiment, Experiment, ExperimentOptions, ExperimentReport};
pub use scenario::{run_scenario, MetricsRecord, Simulation};
