//! Mini-batch training with per-epoch metrics and the restart policy for
//! unlucky quantum weight draws.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{bce_loss, OptimizerKind, OptimizerState, Tensor};
use crate::runner::{tradeoff_point, TradeoffPoint};

use super::{build_model_with, ModelConfig, ModelError, ModelGraph, Variant};

/// Decision threshold on the predicted malicious probability.
pub const DECISION_THRESHOLD: f64 = 0.5;

/// Labeled inputs; `inputs` is `[n, width]` (or any per-sample shape a model accepts).
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub inputs: Tensor,
    pub labels: Vec<f64>,
}

impl Samples {
    pub fn new(inputs: Tensor, labels: Vec<f64>) -> Result<Self, ModelError> {
        if inputs.batch() != labels.len() {
            return Err(ModelError::Data(format!(
                "{} inputs but {} labels",
                inputs.batch(),
                labels.len()
            )));
        }
        Ok(Self { inputs, labels })
    }

    /// Builds `[n, width]` samples from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self, ModelError> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(ModelError::Data("ragged feature rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(Tensor::new(vec![rows.len(), width], data)?, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Data for one run: the training set, the per-epoch evaluation set, and an
/// optional held-back slice evaluated once at the end.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub train: Samples,
    pub test: Samples,
    pub validation: Option<Samples>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartPolicy {
    /// 1-based epoch after which train accuracy is checked.
    pub check_epoch: usize,
    pub min_train_accuracy: f64,
    pub max_restarts: usize,
}

impl Default for RestartPolicy {
    fn default() -> Self {
        Self {
            check_epoch: 5,
            min_train_accuracy: 0.60,
            max_restarts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub restart: Option<RestartPolicy>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.01,
            optimizer: OptimizerKind::default(),
            restart: Some(RestartPolicy::default()),
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 {
            return Err(ModelError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(ModelError::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-epoch curves.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub train_accuracy: Vec<f64>,
    pub test_accuracy: Vec<f64>,
    pub train_loss: Vec<f64>,
    /// Loss on the evaluation (test) set.
    pub val_loss: Vec<f64>,
}

impl History {
    pub fn epochs(&self) -> usize {
        self.train_accuracy.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptLog {
    pub seed: u64,
    pub epochs_run: usize,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub variant: Variant,
    /// Seed the run started from.
    pub initial_seed: u64,
    /// Seed of the attempt whose curves are reported.
    pub seed: u64,
    pub successful: bool,
    pub failure: Option<String>,
    pub pqc_depth: Option<usize>,
    pub disregard_set: Option<Vec<usize>>,
    pub history: History,
    pub final_train_accuracy: Option<f64>,
    pub final_test_accuracy: Option<f64>,
    pub final_train_loss: Option<f64>,
    pub final_val_loss: Option<f64>,
    pub tradeoff: Option<TradeoffPoint>,
    /// Final-epoch accuracy on the held-back slice of the training distribution.
    pub validation_accuracy: Option<f64>,
    pub attempts: Vec<AttemptLog>,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

/// Outcome of [`train`]: the last attempt's model and its report.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: ModelGraph,
    pub report: RunReport,
}

/// Fraction of predictions on the correct side of [`DECISION_THRESHOLD`].
pub fn accuracy(probs: &[f64], labels: &[f64]) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    let correct = probs
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| (p >= DECISION_THRESHOLD) == (y >= 0.5))
        .count();
    correct as f64 / probs.len() as f64
}

/// `(accuracy, mean BCE loss)` of a model on raw samples.
pub fn evaluate(model: &ModelGraph, samples: &Samples) -> Result<(f64, f64), ModelError> {
    let x = model.frozen_features(&samples.inputs)?;
    let probs = model.predict_from(model.frozen_prefix(), &x)?;
    Ok((
        accuracy(&probs, &samples.labels),
        bce_loss(&probs, &samples.labels),
    ))
}

enum Stop {
    Completed,
    BelowThreshold(f64),
    NonFinite(String),
}

fn shuffle_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

/// Trains one model in place for `cfg.epochs`, optionally stopping early at the
/// restart check.
fn fit(
    model: &mut ModelGraph,
    data: &TrainData,
    cfg: &TrainConfig,
    check: Option<&RestartPolicy>,
) -> Result<(History, Stop), ModelError> {
    let start = model.frozen_prefix();
    // a frozen prefix is evaluated once per dataset
    let train_x = model.frozen_features(&data.train.inputs)?;
    let test_x = model.frozen_features(&data.test.inputs)?;
    let mut optimizer = OptimizerState::new(cfg.learning_rate, cfg.optimizer)?;
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed(model.seed()));
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut history = History::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = train_x.select(chunk);
            let labels: Vec<f64> = chunk.iter().map(|&i| data.train.labels[i]).collect();
            let step = match model.loss_and_grads_from(start, &batch, &labels) {
                Ok(step) => step,
                Err(ModelError::Quantum(e)) => {
                    return Ok((history, Stop::NonFinite(format!("epoch {}: {e}", epoch + 1))))
                }
                Err(e) => return Err(e),
            };
            if !step.loss.is_finite() {
                return Ok((
                    history,
                    Stop::NonFinite(format!("non-finite loss in epoch {}", epoch + 1)),
                ));
            }
            match model.apply_grads(&step.grads, &mut optimizer) {
                Ok(()) => {}
                Err(ModelError::Training(msg)) => {
                    return Ok((history, Stop::NonFinite(format!("epoch {}: {msg}", epoch + 1))))
                }
                Err(e) => return Err(e),
            }
        }

        let train_probs = model.predict_from(start, &train_x)?;
        let test_probs = model.predict_from(start, &test_x)?;
        let train_loss = bce_loss(&train_probs, &data.train.labels);
        let val_loss = bce_loss(&test_probs, &data.test.labels);
        let train_acc = accuracy(&train_probs, &data.train.labels);
        history.train_accuracy.push(train_acc);
        history.test_accuracy.push(accuracy(&test_probs, &data.test.labels));
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Ok((
                history,
                Stop::NonFinite(format!("non-finite evaluation loss in epoch {}", epoch + 1)),
            ));
        }
        if let Some(policy) = check {
            if epoch + 1 == policy.check_epoch && train_acc < policy.min_train_accuracy {
                return Ok((history, Stop::BelowThreshold(train_acc)));
            }
        }
    }
    Ok((history, Stop::Completed))
}

/// Trains an already-built model for all epochs without restarts.
pub fn train_model(
    model: &mut ModelGraph,
    data: &TrainData,
    cfg: &TrainConfig,
) -> Result<History, ModelError> {
    cfg.validate()?;
    match fit(model, data, cfg, None)? {
        (history, Stop::Completed) => Ok(history),
        (_, Stop::NonFinite(msg)) => Err(ModelError::Training(msg)),
        (_, Stop::BelowThreshold(_)) => unreachable!("no restart check requested"),
    }
}

/// Builds and trains `variant` from `seed`, reinitializing with `seed + 1` when
/// the restart policy rejects an attempt.
pub fn train(
    variant: Variant,
    model_cfg: &ModelConfig,
    seed: u64,
    data: &TrainData,
    cfg: &TrainConfig,
) -> Result<TrainResult, ModelError> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(ModelError::Data("empty training set".into()));
    }
    let clock = Instant::now();
    let max_restarts = cfg.restart.as_ref().map_or(0, |p| p.max_restarts);
    let mut attempts = Vec::new();
    let mut attempt_seed = seed;
    loop {
        let mut model = build_model_with(variant, attempt_seed, model_cfg)?;
        let (history, stop) = fit(&mut model, data, cfg, cfg.restart.as_ref())?;
        let epochs_run = history.epochs();
        let restarts_left = attempts.len() < max_restarts;
        let (outcome, failure, retry) = match &stop {
            Stop::Completed => ("completed".to_string(), None, false),
            Stop::BelowThreshold(acc) => {
                let policy = cfg.restart.as_ref().expect("check implies policy");
                let msg = format!(
                    "train accuracy {acc:.4} < {:.2} after epoch {}",
                    policy.min_train_accuracy, policy.check_epoch
                );
                if restarts_left {
                    (format!("restarted: {msg}"), None, true)
                } else {
                    (
                        format!("rejected: {msg}"),
                        Some(format!("restart policy exhausted: {msg}")),
                        false,
                    )
                }
            }
            Stop::NonFinite(msg) => (format!("aborted: {msg}"), Some(msg.clone()), false),
        };
        attempts.push(AttemptLog {
            seed: attempt_seed,
            epochs_run,
            outcome,
        });
        if retry {
            attempt_seed = attempt_seed.wrapping_add(1);
            continue;
        }

        let successful = failure.is_none();
        let validation_accuracy = match (&data.validation, successful) {
            (Some(v), true) => Some(evaluate(&model, v)?.0),
            _ => None,
        };
        let tradeoff = if successful {
            tradeoff_point(&history.train_accuracy, &history.test_accuracy).ok()
        } else {
            None
        };
        let report = RunReport {
            variant,
            initial_seed: seed,
            seed: attempt_seed,
            successful,
            failure,
            pqc_depth: model.pqc_depth(),
            disregard_set: model.disregard_set(),
            final_train_accuracy: successful.then(|| *history.train_accuracy.last().unwrap()),
            final_test_accuracy: successful.then(|| *history.test_accuracy.last().unwrap()),
            final_train_loss: successful.then(|| *history.train_loss.last().unwrap()),
            final_val_loss: successful.then(|| *history.val_loss.last().unwrap()),
            history,
            tradeoff,
            validation_accuracy,
            attempts,
            wall_clock_secs: clock.elapsed().as_secs_f64(),
        };
        return Ok(TrainResult { model, report });
    }
}
