//! Experiment runner: dataset generation, spectra, constructions, training,
//! evaluation and report aggregation behind one config.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
