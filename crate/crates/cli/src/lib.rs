//! Experiment harness and command-line front end for `shuffledp`.

pub mod commands;
pub mod data;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod overhead;

pub use data::{gen_zipf, ingest_csv, Dataset};
pub use error::{CliError, Result};
pub use experiment::{run_experiment, ExperimentSpec, Method, ResultRecord};
pub use metrics::mse;
pub use overhead::{overhead_report, OverheadReport};
