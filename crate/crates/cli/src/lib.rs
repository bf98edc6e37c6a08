//! Sweep runner, aggregation and plotting for cosine-distance early stopping.

pub mod config;
pub mod error;
pub mod experiment;
pub mod plot;
pub mod report;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use experiment::{run_config, run_experiment, RunSummary};
