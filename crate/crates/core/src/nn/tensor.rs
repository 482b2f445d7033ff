use serde::{Deserialize, Serialize};

use super::NnError;

/// Row-major real array of shape `[batch, width]` or `[batch, channels, length]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NnError> {
        if shape.is_empty() || shape.len() > 3 {
            return Err(NnError::Shape(format!("unsupported rank {}", shape.len())));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NnError::Shape(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite("tensor entry".into()));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    /// Builds a tensor from data already known to match `shape`.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Number of values per batch entry.
    pub fn sample_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let n = self.sample_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self, NnError> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(NnError::Shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Collapses everything after the batch axis.
    pub fn flatten(self) -> Self {
        let b = self.batch();
        let w = self.sample_len();
        Self {
            shape: vec![b, w],
            data: self.data,
        }
    }

    /// Gathers the given batch entries into a new tensor.
    pub fn select(&self, rows: &[usize]) -> Self {
        let n = self.sample_len();
        let mut data = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            data.extend_from_slice(self.sample(r));
        }
        let mut shape = self.shape.clone();
        shape[0] = rows.len();
        Self { shape, data }
    }
}
