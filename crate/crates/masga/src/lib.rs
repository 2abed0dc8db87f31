//! Dataset IO, experiment configuration, result files and the parallel path
//! executor for `masga-core`.

pub mod checks;
pub mod compare;
pub mod config;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod model;
pub mod output;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use experiment::{execute, run_experiment, RunOutcome};
