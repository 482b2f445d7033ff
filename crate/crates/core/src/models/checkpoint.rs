//! Versioned JSON checkpoints. Floats are written in shortest round-trip form,
//! so a save/load cycle reproduces every parameter bit-for-bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelError, ModelGraph, Variant};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub variant: Variant,
    pub seed: u64,
    pub pqc_depth: Option<usize>,
    pub disregard_set: Option<Vec<usize>>,
    pub model: ModelGraph,
}

impl Checkpoint {
    pub fn of(model: &ModelGraph) -> Self {
        Self {
            format_version: CHECKPOINT_VERSION,
            variant: model.variant(),
            seed: model.seed(),
            pqc_depth: model.pqc_depth(),
            disregard_set: model.disregard_set(),
            model: model.clone(),
        }
    }
}

pub fn to_string(model: &ModelGraph) -> Result<String, ModelError> {
    serde_json::to_string_pretty(&Checkpoint::of(model))
        .map_err(|e| ModelError::Checkpoint(e.to_string()))
}

pub fn from_str(text: &str) -> Result<ModelGraph, ModelError> {
    let ck: Checkpoint =
        serde_json::from_str(text).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    if ck.format_version != CHECKPOINT_VERSION {
        return Err(ModelError::Checkpoint(format!(
            "unsupported checkpoint version {}",
            ck.format_version
        )));
    }
    // re-run construction checks on the decoded layers
    ModelGraph::new(ck.variant, ck.seed, ck.model.input_width, ck.model.layers)
}

pub fn save(model: &ModelGraph, path: &Path) -> Result<(), ModelError> {
    fs::write(path, to_string(model)?).map_err(|e| ModelError::Checkpoint(e.to_string()))
}

pub fn load(path: &Path) -> Result<ModelGraph, ModelError> {
    let text = fs::read_to_string(path).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    from_str(&text)
}
