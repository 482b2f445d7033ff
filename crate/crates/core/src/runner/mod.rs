//! Experiment orchestration: configuration, repeated runs, aggregation,
//! trade-off detection and report files.

mod config;
mod experiment;
mod output;
mod tradeoff;

use thiserror::Error;

use crate::flow::DataError;
use crate::models::ModelError;

pub use config::{ExperimentConfig, ExperimentKind};
pub use experiment::{
    aggregate, final_epoch_metrics, load_input, mean, median, prepare_data, read_dataset,
    run_experiment, run_experiment_with, run_on_dataset, sha256_hex, Aggregate,
    ExperimentOutcome, FinalEpochMetrics, LoadedInput, PreparedData, SplitSizes, Summary,
};
pub use output::{
    curves_csv, emit_outputs, replay, run_stem, Manifest, AGGREGATE_FILE, MANIFEST_FILE,
    MANIFEST_VERSION, TIMING_FILE,
};
pub use tradeoff::{tradeoff_point, TradeoffPoint};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("dataset hash {found} does not match manifest {expected}")]
    DatasetMismatch { expected: String, found: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl RunnerError {
    /// Process exit code: 2 for configuration problems, 3 for data problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Config(_) | RunnerError::Argument(_) | RunnerError::Usage(_) => 2,
            RunnerError::Model(ModelError::Config(_) | ModelError::Graph(_)) => 2,
            RunnerError::Data(DataError::Io(_)) => 3,
            RunnerError::Data(_) | RunnerError::DatasetMismatch { .. } => 3,
            RunnerError::Model(ModelError::Data(_)) => 3,
            _ => 1,
        }
    }
}
