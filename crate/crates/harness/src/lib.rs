//! Experiment runner for the `scvi` solvers: JSON configurations, parallel replications,
//! CSV traces with JSON summaries, and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

pub use config::{ExperimentConfig, Metric, ResolvedExperiment};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, ExperimentResult, Summary};
pub use output::{render_csv, write_outputs};
