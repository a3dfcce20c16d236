//! Scenario runner for the multilink vehicle engine.

pub mod config;
pub mod csv;
pub mod run;
pub mod svg;

pub use config::{parse_config, ConfigError, ScenarioConfig};
pub use run::{run_scenario, RunOutput};
