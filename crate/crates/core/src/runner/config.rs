use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::RunnerError;
use crate::flow::{Direction, Heldout};
use crate::models::{ModelConfig, RestartPolicy, TrainConfig, Variant};
use crate::nn::OptimizerKind;

/// Which split protocol to run. Text form: `e1`, `e2.1`, `e2.2`, `e3:<heldout>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Random 7:3 split.
    E1,
    /// Train on BS1, test on BS2.
    E2_1,
    /// Train on class-balanced BS2, test on BS1.
    E2_2,
    /// Leave one attack type (or the merged minor types) out of training.
    E3(Heldout),
}

impl ExperimentKind {
    pub fn default_repeats(self) -> usize {
        match self {
            ExperimentKind::E3(_) => 5,
            _ => 3,
        }
    }

    pub fn direction(self) -> Option<(Direction, bool)> {
        match self {
            ExperimentKind::E2_1 => Some((Direction::Bs1ToBs2, false)),
            ExperimentKind::E2_2 => Some((Direction::Bs2ToBs1, true)),
            _ => None,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExperimentKind::E1 => f.write_str("e1"),
            ExperimentKind::E2_1 => f.write_str("e2.1"),
            ExperimentKind::E2_2 => f.write_str("e2.2"),
            ExperimentKind::E3(h) => write!(f, "e3:{h}"),
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = RunnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "e1" => Ok(ExperimentKind::E1),
            "e2.1" | "e2_1" => Ok(ExperimentKind::E2_1),
            "e2.2" | "e2_2" => Ok(ExperimentKind::E2_2),
            _ => {
                let rest = lower
                    .strip_prefix("e3:")
                    .ok_or_else(|| RunnerError::Config(format!("unknown experiment '{s}'")))?;
                rest.parse::<Heldout>()
                    .map(ExperimentKind::E3)
                    .map_err(|e| RunnerError::Config(e.to_string()))
            }
        }
    }
}

impl Serialize for ExperimentKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ExperimentKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Every knob of an experiment. Config files use the same keys; unset keys
/// take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub variants: Vec<Variant>,
    pub epochs: usize,
    /// Defaults to 3 (5 for leave-attack-out runs).
    pub repeats: Option<usize>,
    /// Base seed: drives data subsampling and splits, and derives run seeds.
    pub seed: u64,
    /// Explicit per-repeat model seeds; defaults to `seed + 100·i`.
    pub seeds: Option<Vec<u64>>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub restart: Option<RestartPolicy>,
    /// Records kept (stratified by attack type) unless `full` is set.
    pub subsample: usize,
    pub full: bool,
    /// Fraction of the training portion held back for the existing-attack metric.
    pub validation_fraction: f64,
    /// Flow CSV, or a columnar cache file.
    pub data: PathBuf,
    pub schema: Option<PathBuf>,
    pub out: PathBuf,
    pub model: ModelConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            experiment: ExperimentKind::E1,
            variants: vec![Variant::Cnn],
            epochs: train.epochs,
            repeats: None,
            seed: 0,
            seeds: None,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            optimizer: train.optimizer,
            restart: train.restart,
            subsample: 20_000,
            full: false,
            validation_fraction: 0.1,
            data: PathBuf::new(),
            schema: None,
            out: PathBuf::from("runs"),
            model: ModelConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, RunnerError> {
        serde_json::from_str(text).map_err(|e| RunnerError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunnerError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn repeats(&self) -> usize {
        self.repeats
            .unwrap_or_else(|| self.experiment.default_repeats())
    }

    pub fn run_seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.repeats() as u64)
                .map(|i| self.seed.wrapping_add(100 * i))
                .collect(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            restart: self.restart.clone(),
        }
    }

    /// Copy with `repeats` and `seeds` filled in, as recorded in manifests.
    pub fn resolved(&self) -> Self {
        Self {
            repeats: Some(self.repeats()),
            seeds: Some(self.run_seeds()),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let fail = |msg: String| Err(RunnerError::Config(msg));
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.repeats() == 0 {
            return fail("repeats must be at least 1".into());
        }
        if let Some(seeds) = &self.seeds {
            if seeds.len() != self.repeats() {
                return fail(format!(
                    "{} seeds given for {} repeats",
                    seeds.len(),
                    self.repeats()
                ));
            }
        }
        if self.variants.is_empty() {
            return fail("no model variants selected".into());
        }
        if self.batch_size == 0 {
            return fail("batch size must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !self.full && self.subsample == 0 {
            return fail("subsample must be at least 1 (or set full)".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return fail(format!(
                "validation fraction {} outside (0, 1)",
                self.validation_fraction
            ));
        }
        if self.data.as_os_str().is_empty() {
            return fail("no dataset path given".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_kind_text_round_trip() {
        for text in ["e1", "e2.1", "e2.2", "e3:UDPFlood", "e3:RemainType", "e3:SlowrateDoS"] {
            let k: ExperimentKind = text.parse().unwrap();
            assert_eq!(k.to_string(), text);
        }
        assert_eq!("E3:remain".parse::<ExperimentKind>().unwrap(), ExperimentKind::E3(Heldout::RemainType));
        assert!("e4".parse::<ExperimentKind>().is_err());
        assert!("e3:Smurf".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn defaults_and_seeds() {
        let mut cfg = ExperimentConfig {
            data: "x.csv".into(),
            ..Default::default()
        };
        assert_eq!(cfg.repeats(), 3);
        assert_eq!(cfg.run_seeds(), vec![0, 100, 200]);
        cfg.experiment = ExperimentKind::E3(Heldout::HttpFlood);
        assert_eq!(cfg.repeats(), 5);
        cfg.validate().unwrap();
        cfg.seeds = Some(vec![1, 2]);
        assert!(matches!(cfg.validate(), Err(RunnerError::Config(_))));
    }

    #[test]
    fn invalid_values_rejected() {
        let base = ExperimentConfig {
            data: "x.csv".into(),
            ..Default::default()
        };
        for bad in [
            ExperimentConfig { epochs: 0, ..base.clone() },
            ExperimentConfig { repeats: Some(0), ..base.clone() },
            ExperimentConfig { variants: vec![], ..base.clone() },
            ExperimentConfig { data: PathBuf::new(), ..base.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let cfg = ExperimentConfig::from_json(r#"{"experiment": "e3:UDPFlood", "variants": ["cnn", "qcnn-ane"], "data": "d.csv"}"#).unwrap();
        assert_eq!(cfg.variants, vec![Variant::Cnn, Variant::QcnnAnE]);
        let back = ExperimentConfig::from_json(&serde_json::to_string(&cfg.resolved()).unwrap()).unwrap();
        assert_eq!(back, cfg.resolved());
        assert!(ExperimentConfig::from_json(r#"{"epoch": 3}"#).is_err());
    }
}
