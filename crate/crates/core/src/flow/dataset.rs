use serde::{Deserialize, Serialize};

use super::record::{FlowRecord, N_FEATURES};
use super::DataError;
use crate::models::{ModelError, Samples};
use crate::nn::Tensor;

/// Per-feature min/max learned on a training portion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: [f64; N_FEATURES],
    pub max: [f64; N_FEATURES],
}

impl NormStats {
    pub fn fit(records: &[FlowRecord]) -> Result<Self, DataError> {
        if records.is_empty() {
            return Err(DataError::Argument("cannot fit normalization on an empty set".into()));
        }
        let mut min = [f64::INFINITY; N_FEATURES];
        let mut max = [f64::NEG_INFINITY; N_FEATURES];
        for r in records {
            for i in 0..N_FEATURES {
                min[i] = min[i].min(r.features[i]);
                max[i] = max[i].max(r.features[i]);
            }
        }
        Ok(Self { min, max })
    }

    /// `(x − min)/(max − min)` clamped to `[0, 1]`; constant features map to 0.
    pub fn scale(&self, features: &[f64; N_FEATURES]) -> [f64; N_FEATURES] {
        let mut out = [0.0; N_FEATURES];
        for i in 0..N_FEATURES {
            let range = self.max[i] - self.min[i];
            out[i] = if range > 0.0 {
                ((features[i] - self.min[i]) / range).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
        out
    }

    pub fn apply(&self, data: &Dataset) -> Dataset {
        Dataset {
            records: data
                .records
                .iter()
                .map(|r| FlowRecord {
                    features: self.scale(&r.features),
                    ..r.clone()
                })
                .collect(),
            stats: Some(self.clone()),
            provenance: data.provenance.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<FlowRecord>,
    /// Statistics the records were normalized with, if any.
    pub stats: Option<NormStats>,
    /// Free-form description of how this set was produced.
    pub provenance: String,
}

impl Dataset {
    pub fn new(records: Vec<FlowRecord>, provenance: impl Into<String>) -> Self {
        Self {
            records,
            stats: None,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_malicious(&self) -> usize {
        self.records.iter().filter(|r| r.is_malicious()).count()
    }

    /// `[n, 28]` model inputs with 0/1 labels.
    pub fn to_samples(&self) -> Result<Samples, ModelError> {
        let data = self.records.iter().flat_map(|r| r.features).collect();
        let inputs = Tensor::new(vec![self.len(), N_FEATURES], data)?;
        Samples::new(inputs, self.records.iter().map(FlowRecord::label).collect())
    }
}

/// Min-max scales both sets with statistics learned on `train`.
pub fn normalize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset), DataError> {
    let stats = NormStats::fit(&train.records)?;
    Ok((stats.apply(train), stats.apply(test)))
}
