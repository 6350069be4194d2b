//! Experiment runner for `metricscope-core`: config files, single runs,
//! multi-loss suites and training-log charts.

pub mod charts;
pub mod config;
pub mod error;
pub mod runner;
pub mod suite;

pub use config::{BatchConfig, DataSource, ExperimentConfig, HeadConfig};
pub use error::{CliError, Result};
pub use runner::{run_experiment, ExperimentSummary, FailureMarker};
pub use suite::{run_suite, SuiteReport};
