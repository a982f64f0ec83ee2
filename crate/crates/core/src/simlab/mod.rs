//! Monte-Carlo scenario runner: configuration, per-trial pipelines,
//! aggregation and CSV output.

pub mod config;
pub mod csv;
pub mod runner;
pub mod trial;

pub use config::{parse_config, Scenario, ScenarioConfig};
pub use trial::AnglePolicy;
pub use csv::{emit_csv, emit_gnuplot, format_value, write_csv};
pub use runner::{run_scenario, ResultRecord, RunReport};
