//! Repeated training runs over one experiment protocol, and their aggregation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ExperimentKind};
use super::RunnerError;
use crate::flow::{
    decode_cache, holdout_slice, is_cache, load_flows_from_reader, normalize, split_exp1,
    split_exp2, split_exp3, subsample, DataError, Dataset, LoadReport, NormStats, SchemaMap,
};
use crate::models::{train, RunReport, TrainData, Variant};

const EXP1_RATIO: f64 = 0.7;

/// Normalized partitions for one experiment.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Dataset,
    pub test: Dataset,
    /// Held-back slice of the training distribution (leave-attack-out only).
    pub validation: Option<Dataset>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub test: usize,
    pub validation: usize,
}

impl PreparedData {
    pub fn sizes(&self) -> SplitSizes {
        SplitSizes {
            train: self.train.len(),
            test: self.test.len(),
            validation: self.validation.as_ref().map_or(0, Dataset::len),
        }
    }
}

/// Subsamples (unless `full`), splits by protocol, and normalizes every
/// partition with training statistics. Depends only on `(data, cfg.seed)`.
pub fn prepare_data(cfg: &ExperimentConfig, data: &Dataset) -> Result<PreparedData, RunnerError> {
    if data.is_empty() {
        return Err(DataError::Argument("dataset has no records".into()).into());
    }
    let base = if cfg.full {
        data.clone()
    } else {
        subsample(data, cfg.subsample, cfg.seed)
    };
    let (mut train, test) = match cfg.experiment {
        ExperimentKind::E1 => split_exp1(&base, EXP1_RATIO, cfg.seed)?,
        ExperimentKind::E2_1 | ExperimentKind::E2_2 => {
            let (direction, balance) = cfg.experiment.direction().expect("station experiment");
            split_exp2(&base, direction, balance, cfg.seed)?
        }
        ExperimentKind::E3(heldout) => split_exp3(&base, heldout, cfg.seed)?,
    };
    let mut validation = None;
    if matches!(cfg.experiment, ExperimentKind::E3(_)) {
        let (kept, held) = holdout_slice(&train, cfg.validation_fraction, cfg.seed)?;
        train = kept;
        validation = Some(held);
    }
    if train.is_empty() || test.is_empty() {
        return Err(DataError::Argument(format!(
            "empty partition: {} train, {} test records",
            train.len(),
            test.len()
        ))
        .into());
    }
    let (train, test) = normalize(&train, &test)?;
    let stats: &NormStats = train.stats.as_ref().expect("normalized");
    let validation = validation.map(|v| stats.apply(&v));
    Ok(PreparedData {
        train,
        test,
        validation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub tradeoff_train_accuracy: f64,
    pub tradeoff_test_accuracy: f64,
    pub validation_accuracy: Option<f64>,
}

/// Per-variant aggregate over the successful repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub variant: Variant,
    pub runs: usize,
    pub successful: usize,
    pub unsuccessful: usize,
    pub mean: Option<Summary>,
    /// Reported for leave-attack-out experiments.
    pub median: Option<Summary>,
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Middle value, or the mean of the two middle values.
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    })
}

fn summarize(runs: &[&RunReport], stat: fn(&[f64]) -> Option<f64>) -> Option<Summary> {
    let pick = |f: &dyn Fn(&RunReport) -> Option<f64>| -> Vec<f64> {
        runs.iter().filter_map(|r| f(r)).collect()
    };
    Some(Summary {
        train_accuracy: stat(&pick(&|r| r.final_train_accuracy))?,
        test_accuracy: stat(&pick(&|r| r.final_test_accuracy))?,
        tradeoff_train_accuracy: stat(&pick(&|r| r.tradeoff.map(|t| t.train_accuracy)))?,
        tradeoff_test_accuracy: stat(&pick(&|r| r.tradeoff.map(|t| t.test_accuracy)))?,
        validation_accuracy: stat(&pick(&|r| r.validation_accuracy)),
    })
}

/// Aggregates the runs of one variant; unsuccessful runs are counted, not averaged.
pub fn aggregate(variant: Variant, runs: &[RunReport], with_median: bool) -> Aggregate {
    let mine: Vec<&RunReport> = runs.iter().filter(|r| r.variant == variant).collect();
    let ok: Vec<&RunReport> = mine.iter().copied().filter(|r| r.successful).collect();
    Aggregate {
        variant,
        runs: mine.len(),
        successful: ok.len(),
        unsuccessful: mine.len() - ok.len(),
        mean: summarize(&ok, mean),
        median: if with_median { summarize(&ok, median) } else { None },
    }
}

/// Accuracy on the held-out attack type(s) and on the training distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalEpochMetrics {
    pub unseen_accuracy: f64,
    /// Measured on the held-back validation slice.
    pub existing_accuracy: f64,
}

pub fn final_epoch_metrics(
    report: &RunReport,
    experiment: ExperimentKind,
) -> Result<FinalEpochMetrics, RunnerError> {
    if !matches!(experiment, ExperimentKind::E3(_)) {
        return Err(RunnerError::Usage(format!(
            "unseen/existing accuracy is defined only for leave-attack-out runs, not {experiment}"
        )));
    }
    match (report.final_test_accuracy, report.validation_accuracy) {
        (Some(unseen_accuracy), Some(existing_accuracy)) => Ok(FinalEpochMetrics {
            unseen_accuracy,
            existing_accuracy,
        }),
        _ => Err(RunnerError::Usage(format!(
            "run seeded {} has no final metrics (unsuccessful or missing validation slice)",
            report.initial_seed
        ))),
    }
}

/// Everything a finished experiment reports.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    /// Configuration with repeats and seeds resolved.
    pub config: ExperimentConfig,
    pub dataset_sha256: String,
    pub dataset_records: usize,
    pub load_report: Option<LoadReport>,
    pub sizes: SplitSizes,
    pub runs: Vec<RunReport>,
    pub aggregates: Vec<Aggregate>,
}

impl ExperimentOutcome {
    pub fn unsuccessful_runs(&self) -> usize {
        self.runs.iter().filter(|r| !r.successful).count()
    }

    pub fn all_unsuccessful(&self) -> bool {
        self.runs.iter().all(|r| !r.successful)
    }

    pub fn final_epoch_metrics(&self) -> Vec<Option<FinalEpochMetrics>> {
        self.runs
            .iter()
            .map(|r| final_epoch_metrics(r, self.config.experiment).ok())
            .collect()
    }
}

/// Raw dataset bytes → records, accepting either a flow CSV or a cache file.
pub fn read_dataset(
    bytes: &[u8],
    schema: &SchemaMap,
) -> Result<(Dataset, Option<LoadReport>), RunnerError> {
    if is_cache(bytes) {
        return Ok((decode_cache(bytes)?, None));
    }
    let loaded = load_flows_from_reader(bytes, schema)?;
    Ok((Dataset::new(loaded.records, "csv"), Some(loaded.report)))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A dataset read from disk, with the hash of its raw bytes.
#[derive(Debug, Clone)]
pub struct LoadedInput {
    pub data: Dataset,
    pub sha256: String,
    pub report: Option<LoadReport>,
}

pub fn load_input(cfg: &ExperimentConfig) -> Result<LoadedInput, RunnerError> {
    let schema = match &cfg.schema {
        Some(path) => SchemaMap::from_path(path)?,
        None => SchemaMap::default(),
    };
    let bytes = std::fs::read(&cfg.data).map_err(|e| {
        DataError::Argument(format!("cannot read dataset {}: {e}", cfg.data.display()))
    })?;
    let (data, report) = read_dataset(&bytes, &schema)?;
    Ok(LoadedInput {
        data,
        sha256: sha256_hex(&bytes),
        report,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, RunnerError> {
    run_experiment_with(cfg, |_| {})
}

/// Like [`run_experiment`], calling `on_run` after each finished run.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    on_run: impl FnMut(&RunReport),
) -> Result<ExperimentOutcome, RunnerError> {
    cfg.validate()?;
    let input = load_input(cfg)?;
    run_on_dataset(cfg, &input.data, input.sha256, input.report, on_run)
}

/// Runs every (variant, seed) pair on an in-memory dataset.
pub fn run_on_dataset(
    cfg: &ExperimentConfig,
    data: &Dataset,
    dataset_sha256: String,
    load_report: Option<LoadReport>,
    mut on_run: impl FnMut(&RunReport),
) -> Result<ExperimentOutcome, RunnerError> {
    cfg.validate()?;
    let config = cfg.resolved();
    let prepared = prepare_data(&config, data)?;
    let train_data = TrainData {
        train: prepared.train.to_samples()?,
        test: prepared.test.to_samples()?,
        validation: prepared.validation.as_ref().map(Dataset::to_samples).transpose()?,
    };
    let train_cfg = config.train_config();
    let mut runs = Vec::new();
    for &variant in &config.variants {
        for seed in config.run_seeds() {
            let result = train(variant, &config.model, seed, &train_data, &train_cfg)?;
            on_run(&result.report);
            runs.push(result.report);
        }
    }
    let with_median = matches!(config.experiment, ExperimentKind::E3(_));
    let aggregates = config
        .variants
        .iter()
        .map(|&v| aggregate(v, &runs, with_median))
        .collect();
    Ok(ExperimentOutcome {
        config,
        dataset_sha256,
        dataset_records: data.len(),
        load_report,
        sizes: prepared.sizes(),
        runs,
        aggregates,
    })
}
