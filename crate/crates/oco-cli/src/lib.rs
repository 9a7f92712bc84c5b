//! Experiment harness: configs, seeded runs, bound overlays, CSV output and the acceptance suite.

pub mod accept;
pub mod bounds;
pub mod build;
pub mod config;
pub mod csv;
pub mod error;
pub mod runner;
pub mod seeds;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use runner::{run_experiment, RunOptions, RunSummary};
