//! The six detector architectures over the classical and quantum engines.

pub mod checkpoint;
mod graph;
mod train;
mod zoo;

use thiserror::Error;

use crate::nn::NnError;
use crate::quantum::QuantumError;

pub use graph::{Layer, LossGrads, ModelGrads, ModelGraph, QuantumLayer, Tape};
pub use train::{
    accuracy, evaluate, train, train_model, AttemptLog, History, RestartPolicy, RunReport,
    Samples, TrainConfig, TrainData, TrainResult, DECISION_THRESHOLD,
};
pub use zoo::{build_model, build_model_with, quanvolution_preprocess, ModelConfig, Variant};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("graph construction: {0}")]
    Graph(String),
    #[error("unknown model variant '{0}'")]
    UnknownVariant(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("data: {0}")]
    Data(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Nn(#[from] NnError),
}
