//! Experiment runner for operator learning by optimally weighted least squares.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod presets;
pub mod runner;
pub mod setup;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use runner::{resolve, run, Overrides, RunStatus};
