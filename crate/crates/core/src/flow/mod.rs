//! Flow-feature ingestion, normalization and experiment splits.

mod cache;
mod dataset;
mod load;
mod record;
mod split;
pub mod synthetic;

use thiserror::Error;

pub use cache::{decode_cache, encode_cache, is_cache, load_cache, save_cache, CACHE_VERSION};
pub use dataset::{normalize, Dataset, NormStats};
pub use load::{load_flows, load_flows_from_reader, LoadReport, LoadedFlows, SchemaMap};
pub use record::{AttackType, BaseStation, FlowRecord, FEATURE_NAMES, N_FEATURES};
pub use split::{
    balance_classes, holdout_slice, split_exp1, split_exp2, split_exp3, subsample, Direction,
    Heldout,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("schema: missing required column '{0}'")]
    MissingColumn(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
}
