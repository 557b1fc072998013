//! Command surface of semvoc: configuration, dataset loading, the individual
//! pipeline steps and the experiment sweep.

pub mod commands;
pub mod config;
pub mod data;
pub mod experiment;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, Summary};
