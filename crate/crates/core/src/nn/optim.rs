use serde::{Deserialize, Serialize};

use super::NnError;

/// A parameter array paired with its gradient for one update step.
pub struct ParamBlock<'a> {
    /// Human-readable owner, e.g. `"layer 3 (dense) weights"`.
    pub label: String,
    pub values: &'a mut [f64],
    pub grads: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    Sgd,
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First-order optimizer with per-block moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub kind: OptimizerKind,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(learning_rate: f64, kind: OptimizerKind) -> Result<Self, NnError> {
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return Err(NnError::Config(format!("learning rate {learning_rate}")));
        }
        Ok(Self {
            learning_rate,
            kind,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        })
    }

    pub fn adam(learning_rate: f64) -> Result<Self, NnError> {
        Self::new(learning_rate, OptimizerKind::default())
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Updates every block in place. Fails before touching any parameter if a
    /// gradient is non-finite.
    pub fn step(&mut self, blocks: &mut [ParamBlock<'_>]) -> Result<(), NnError> {
        for b in blocks.iter() {
            if b.values.len() != b.grads.len() {
                return Err(NnError::Shape(format!("gradient shape for {}", b.label)));
            }
            if b.grads.iter().any(|g| !g.is_finite()) {
                return Err(NnError::NonFinite(format!("gradient in {}", b.label)));
            }
        }
        if self.first.is_empty() {
            self.first = blocks.iter().map(|b| vec![0.0; b.values.len()]).collect();
            self.second = self.first.clone();
        } else if self.first.len() != blocks.len()
            || self.first.iter().zip(blocks.iter()).any(|(m, b)| m.len() != b.values.len())
        {
            return Err(NnError::Shape("parameter layout changed between steps".into()));
        }
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for b in blocks.iter_mut() {
                    for (v, g) in b.values.iter_mut().zip(b.grads) {
                        *v -= lr * g;
                    }
                }
            }
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for ((b, m), v2) in blocks.iter_mut().zip(&mut self.first).zip(&mut self.second) {
                    for i in 0..b.values.len() {
                        let g = b.grads[i];
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                        v2[i] = beta2 * v2[i] + (1.0 - beta2) * g * g;
                        let mhat = m[i] / c1;
                        let vhat = v2[i] / c2;
                        b.values[i] -= lr * mhat / (vhat.sqrt() + epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}
