//! Command-line driver for the reduced Schwarz solver: strict JSON experiment
//! configs, a binary archive for compressed maps, and CSV outputs.

pub mod archive;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{strip_experiment, ExperimentConfig, Setup};
pub use error::CliError;
