//! Command-line driver: scenario configs, sweeps and reports.

pub mod config;
pub mod error;
pub mod report;
pub mod run;

pub use config::{parse_config, Recipe, RunDescriptor, Scenario, ScenarioConfig};
pub use error::CliError;
pub use report::{emit_report, Report};
pub use run::{run_scenario, Outcome, RunStatus, RunSummary, ScenarioSummary};
