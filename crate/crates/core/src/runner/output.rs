//! Report files: per-run JSON and curve CSVs, the aggregate, a reproducibility
//! manifest, and wall-clock timings kept apart so the rest is byte-stable.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use super::experiment::{
    load_input, run_on_dataset, Aggregate, ExperimentOutcome, FinalEpochMetrics, SplitSizes,
};
use super::RunnerError;
use crate::flow::LoadReport;
use crate::fsutil::write_atomic;
use crate::models::History;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const AGGREGATE_FILE: &str = "aggregate.json";
pub const TIMING_FILE: &str = "timing.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub dataset_sha256: String,
    pub dataset_records: usize,
    pub load_report: Option<LoadReport>,
    pub total_runs: usize,
    pub unsuccessful_runs: usize,
}

impl Manifest {
    pub fn of(outcome: &ExperimentOutcome) -> Self {
        Self {
            format_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: outcome.config.clone(),
            seeds: outcome.config.run_seeds(),
            dataset_sha256: outcome.dataset_sha256.clone(),
            dataset_records: outcome.dataset_records,
            load_report: outcome.load_report.clone(),
            total_runs: outcome.runs.len(),
            unsuccessful_runs: outcome.unsuccessful_runs(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunnerError::Config(format!("{}: {e}", path.display())))?;
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| RunnerError::Config(format!("manifest {}: {e}", path.display())))?;
        if m.format_version != MANIFEST_VERSION {
            return Err(RunnerError::Config(format!(
                "manifest version {}, expected {MANIFEST_VERSION}",
                m.format_version
            )));
        }
        Ok(m)
    }
}

#[derive(Debug, Serialize)]
struct AggregateFile<'a> {
    experiment: String,
    sizes: SplitSizes,
    aggregates: &'a [Aggregate],
    /// Per run, in run-file order; present for leave-attack-out experiments.
    final_epoch_metrics: Option<Vec<Option<FinalEpochMetrics>>>,
}

#[derive(Debug, Serialize)]
struct Timing {
    run: String,
    wall_clock_secs: f64,
}

/// File stem of the `index`-th run (0-based across the whole experiment).
pub fn run_stem(outcome: &ExperimentOutcome, index: usize) -> String {
    let report = &outcome.runs[index];
    let k = outcome.runs[..index]
        .iter()
        .filter(|r| r.variant == report.variant)
        .count();
    format!("run_{}_{k:02}", report.variant.slug())
}

/// `epoch,train_acc,test_acc,train_loss,val_loss` with 1-based epochs.
pub fn curves_csv(history: &History) -> String {
    let mut s = String::from("epoch,train_acc,test_acc,train_loss,val_loss\n");
    for e in 0..history.epochs() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            e + 1,
            history.train_accuracy[e],
            history.test_accuracy[e],
            history.train_loss[e],
            history.val_loss[e]
        );
    }
    s
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunnerError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

/// Writes all report files into `outdir`, returning their paths.
pub fn emit_outputs(outcome: &ExperimentOutcome, outdir: &Path) -> Result<Vec<PathBuf>, RunnerError> {
    std::fs::create_dir_all(outdir)?;
    let mut written = Vec::new();
    let mut timings = Vec::new();
    for (i, report) in outcome.runs.iter().enumerate() {
        let stem = run_stem(outcome, i);
        let json = outdir.join(format!("{stem}.json"));
        write_json(&json, report)?;
        let csv = outdir.join(format!("curves_{stem}.csv"));
        write_atomic(&csv, curves_csv(&report.history).as_bytes())?;
        written.extend([json, csv]);
        timings.push(Timing {
            run: stem,
            wall_clock_secs: report.wall_clock_secs,
        });
    }
    let aggregate = AggregateFile {
        experiment: outcome.config.experiment.to_string(),
        sizes: outcome.sizes,
        aggregates: &outcome.aggregates,
        final_epoch_metrics: matches!(outcome.config.experiment, ExperimentKind::E3(_))
            .then(|| outcome.final_epoch_metrics()),
    };
    let files = [
        (AGGREGATE_FILE, serde_json::to_string_pretty(&aggregate)?),
        (MANIFEST_FILE, serde_json::to_string_pretty(&Manifest::of(outcome))?),
        (TIMING_FILE, serde_json::to_string_pretty(&timings)?),
    ];
    for (name, text) in files {
        let path = outdir.join(name);
        write_atomic(&path, (text + "\n").as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// Re-runs the experiment a manifest describes, refusing a changed dataset.
/// `out` overrides the recorded output directory.
pub fn replay(manifest: &Manifest, out: Option<&Path>) -> Result<ExperimentOutcome, RunnerError> {
    let mut cfg = manifest.config.clone();
    if let Some(out) = out {
        cfg.out = out.to_path_buf();
    }
    cfg.validate()?;
    let input = load_input(&cfg)?;
    if input.sha256 != manifest.dataset_sha256 {
        return Err(RunnerError::DatasetMismatch {
            expected: manifest.dataset_sha256.clone(),
            found: input.sha256,
        });
    }
    run_on_dataset(&cfg, &input.data, input.sha256, input.report, |_| {})
}
