//! Batch driver: JSON experiment configs in, figure-ready CSV/JSON out.

pub mod config;
pub mod error;
pub mod reproduce;
pub mod run;

pub use config::{parse_config, Command, ExperimentConfig, Mode};
pub use error::CliError;
pub use reproduce::{reproduce_all, ReproduceSummary};
pub use run::{run, Overrides, RunReport};
