//! Config-driven experiments and their output artifacts.

pub mod config;
pub mod run;

pub use config::{load_scenario, parse_scenario_text, resolve, Experiment, Overrides, Scenario, ScenarioFile};
pub use run::{run_scenario, validate_config, RunReport, Summary, ValidationReport};
