//! `qcnn`: train and compare the classical and hybrid detectors on flow data.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 every run of the experiment was unsuccessful, 1 anything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qcnn_core::flow::synthetic;
use qcnn_core::runner::{
    emit_outputs, replay, run_experiment_with, ExperimentConfig, ExperimentOutcome, Manifest,
    RunnerError,
};
use serde_json::{Map, Value};

const EXIT_ALL_UNSUCCESSFUL: u8 = 4;

#[derive(Parser)]
#[command(name = "qcnn", version, about = "Hybrid quantum-classical CNN intrusion detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write reports to the output directory.
    Train(TrainArgs),
    /// Re-run the experiment recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory (defaults to the one recorded in the manifest).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a generated flow CSV with the dataset's schema and class mix.
    Synth {
        /// Fraction of the full record inventory to generate, in (0, 1].
        #[arg(long, default_value_t = 0.01)]
        scale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Every flag overrides the same-named key of `--config`.
#[derive(Args)]
struct TrainArgs {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Variant(s): cnn, qcnn-ane, qcnn-ame, qcnn-mlayer, quanconv, quanvolution.
    #[arg(long, value_delimiter = ',')]
    variant: Vec<String>,
    /// e1, e2.1, e2.2 or e3:<UDPFlood|HTTPFlood|SlowrateDoS|RemainType>.
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Column-name mapping for CSVs with a different header.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use every record instead of a subsample.
    #[arg(long)]
    full: bool,
}

impl TrainArgs {
    fn overrides(&self) -> Map<String, Value> {
        let mut m = Map::new();
        let mut put = |key: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(key.to_string(), v);
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| Value::from(p.to_string_lossy().into_owned()));
        put("variants", (!self.variant.is_empty()).then(|| Value::from(self.variant.clone())));
        put("experiment", self.experiment.clone().map(Value::from));
        put("data", path(&self.data));
        put("epochs", self.epochs.map(Value::from));
        put("repeats", self.repeats.map(Value::from));
        put("seed", self.seed.map(Value::from));
        put("subsample", self.subsample.map(Value::from));
        put("learning_rate", self.learning_rate.map(Value::from));
        put("batch_size", self.batch_size.map(Value::from));
        put("schema", path(&self.schema));
        put("out", path(&self.out));
        put("full", self.full.then_some(Value::Bool(true)));
        m
    }

    fn config(&self) -> Result<ExperimentConfig, RunnerError> {
        let mut base = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| RunnerError::Config(format!("{}: {e}", p.display())))?;
                match serde_json::from_str(&text) {
                    Ok(Value::Object(m)) => m,
                    Ok(_) => return Err(RunnerError::Config(format!("{}: expected a JSON object", p.display()))),
                    Err(e) => return Err(RunnerError::Config(format!("{}: {e}", p.display()))),
                }
            }
            None => Map::new(),
        };
        // The file may use the flag's singular spelling.
        if let Some(v) = base.remove("variant") {
            let list = match v {
                Value::String(s) => Value::from(s.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>()),
                other => other,
            };
            base.insert("variants".into(), list);
        }
        base.extend(self.overrides());
        let cfg: ExperimentConfig = serde_json::from_value(Value::Object(base))
            .map_err(|e| RunnerError::Config(e.to_string()))?;
        if cfg.data.as_os_str().is_empty() {
            return Err(RunnerError::Config("no dataset given (--data or \"data\" in the config)".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_summary(outcome: &ExperimentOutcome, out: &Path) {
    println!(
        "{} on {} records (sha256 {}): train {} / test {}{}",
        outcome.config.experiment,
        outcome.dataset_records,
        &outcome.dataset_sha256[..12],
        outcome.sizes.train,
        outcome.sizes.test,
        match outcome.sizes.validation {
            0 => String::new(),
            v => format!(" / validation {v}"),
        }
    );
    println!("{:<14} {:>5} {:>10} {:>10} {:>14}", "variant", "ok", "train acc", "test acc", "trade-off test");
    for a in &outcome.aggregates {
        let ok = format!("{}/{}", a.successful, a.runs);
        match &a.mean {
            Some(m) => println!(
                "{:<14} {:>5} {:>10.4} {:>10.4} {:>14.4}",
                a.variant.slug(),
                ok,
                m.train_accuracy,
                m.test_accuracy,
                m.tradeoff_test_accuracy
            ),
            None => println!("{:<14} {:>5} {:>10} {:>10} {:>14}", a.variant.slug(), ok, "-", "-", "-"),
        }
    }
    println!("reports written to {}", out.display());
}

fn finish(outcome: ExperimentOutcome) -> Result<ExitCode, RunnerError> {
    let out = outcome.config.out.clone();
    emit_outputs(&outcome, &out)?;
    print_summary(&outcome, &out);
    if outcome.all_unsuccessful() {
        eprintln!("error: every run was unsuccessful (restart policy exhausted)");
        return Ok(ExitCode::from(EXIT_ALL_UNSUCCESSFUL));
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode, RunnerError> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.config()?;
            let outcome = run_experiment_with(&cfg, |r| {
                let last = r.history.epochs().saturating_sub(1);
                eprintln!(
                    "  {} seed {}: {} train {:.4} test {:.4}",
                    r.variant.slug(),
                    r.seed,
                    if r.successful { "done" } else { "unsuccessful" },
                    r.history.train_accuracy.get(last).copied().unwrap_or(f64::NAN),
                    r.history.test_accuracy.get(last).copied().unwrap_or(f64::NAN),
                );
            })?;
            finish(outcome)
        }
        Command::Replay { manifest, out } => {
            let m = Manifest::load(&manifest)?;
            finish(replay(&m, out.as_deref())?)
        }
        Command::Synth { scale, seed, out } => {
            let records = synthetic::synthesize(scale, seed)?;
            let file = std::fs::File::create(&out)?;
            synthetic::write_flows_csv(&records, std::io::BufWriter::new(file))?;
            println!("wrote {} records to {}", records.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            ExitCode::from(code as u8)
        }
    }
}
