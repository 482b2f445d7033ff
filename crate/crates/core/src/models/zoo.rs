//! Wiring of the six detector architectures.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{conv_output_len, LayerParams, Tensor};
use crate::quantum::{Axis, Embedding, QuantumLayerSpec, QuantumWeights};

use super::graph::{quanvolve, Layer, ModelGraph, QuantumLayer};
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Classical baseline.
    #[serde(rename = "cnn")]
    Cnn,
    /// Angle-embedded quantum layer in the fully connected block.
    #[serde(rename = "qcnn-ane")]
    QcnnAnE,
    /// Amplitude-embedded quantum layer in the fully connected block.
    #[serde(rename = "qcnn-ame")]
    QcnnAmE,
    /// Four parallel angle-embedded quantum layers.
    #[serde(rename = "qcnn-mlayer")]
    QcnnMlayer,
    /// Quantum convolution with disregarded qubits.
    #[serde(rename = "quanconv")]
    QuanConvCnn,
    /// Frozen quanvolution in front of the classical network.
    #[serde(rename = "quanvolution")]
    QuanvolutionNn,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Cnn,
        Variant::QcnnAnE,
        Variant::QcnnAmE,
        Variant::QcnnMlayer,
        Variant::QuanConvCnn,
        Variant::QuanvolutionNn,
    ];

    /// Command-line / file name of the variant.
    pub fn slug(self) -> &'static str {
        match self {
            Variant::Cnn => "cnn",
            Variant::QcnnAnE => "qcnn-ane",
            Variant::QcnnAmE => "qcnn-ame",
            Variant::QcnnMlayer => "qcnn-mlayer",
            Variant::QuanConvCnn => "quanconv",
            Variant::QuanvolutionNn => "quanvolution",
        }
    }

    /// Display name used in reports.
    pub fn display_name(self) -> &'static str {
        match self {
            Variant::Cnn => "CNN",
            Variant::QcnnAnE => "QCNNAnE",
            Variant::QcnnAmE => "QCNNAmE",
            Variant::QcnnMlayer => "QCNNMlayer",
            Variant::QuanConvCnn => "Quan-ConvCNN",
            Variant::QuanvolutionNn => "QuanvolutionNN",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Variant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.slug().eq_ignore_ascii_case(s) || v.display_name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::UnknownVariant(s.to_string()))
    }
}

/// Widths and depths of the architectures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub input_width: usize,
    pub channels: usize,
    pub kernel: usize,
    pub padding: usize,
    pub pool: usize,
    /// Hidden dense width of the classical head.
    pub hidden: usize,
    pub pqc_depth: usize,
    pub rotation_axis: Axis,
    pub ane_qubits: usize,
    pub ame_qubits: usize,
    pub mlayer_groups: usize,
    pub mlayer_qubits: usize,
    pub quanconv_qubits: usize,
    pub quanconv_disregarded: usize,
    pub quanv_qubits: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_width: 28,
            channels: 32,
            kernel: 3,
            padding: 1,
            pool: 2,
            hidden: 64,
            pqc_depth: 2,
            rotation_axis: Axis::Y,
            ane_qubits: 4,
            ame_qubits: 4,
            mlayer_groups: 4,
            mlayer_qubits: 4,
            quanconv_qubits: 6,
            quanconv_disregarded: 2,
            quanv_qubits: 2,
        }
    }
}

impl ModelConfig {
    /// Narrow configuration for gradient checks and fast tests.
    pub fn reduced() -> Self {
        Self {
            channels: 4,
            hidden: 8,
            ..Self::default()
        }
    }
}

struct Builder<'a> {
    cfg: &'a ModelConfig,
    rng: ChaCha8Rng,
    layers: Vec<Layer>,
    /// Per-sample shape after the layers pushed so far.
    shape: Vec<usize>,
}

impl<'a> Builder<'a> {
    fn new(cfg: &'a ModelConfig, seed: u64) -> Self {
        Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            layers: Vec::new(),
            shape: vec![1, cfg.input_width],
        }
    }

    fn conv(&mut self, c_out: usize) -> Result<(), ModelError> {
        let [c_in, len] = self.shape[..] else {
            return Err(ModelError::Graph("conv after flatten".into()));
        };
        let out = conv_output_len(len, self.cfg.kernel, 1, self.cfg.padding)
            .ok_or_else(|| ModelError::Graph(format!("kernel does not fit length {len}")))?;
        let params = LayerParams::uniform(vec![c_out, c_in, self.cfg.kernel], &mut self.rng);
        self.layers.push(Layer::Conv1d {
            params,
            kernel: self.cfg.kernel,
            stride: 1,
            padding: self.cfg.padding,
        });
        self.shape = vec![c_out, out];
        Ok(())
    }

    fn pool(&mut self) -> Result<(), ModelError> {
        let [c, len] = self.shape[..] else {
            return Err(ModelError::Graph("pool after flatten".into()));
        };
        if len < self.cfg.pool {
            return Err(ModelError::Graph(format!("length {len} below pool window")));
        }
        self.layers.push(Layer::MaxPool {
            window: self.cfg.pool,
        });
        self.shape = vec![c, len / self.cfg.pool];
        Ok(())
    }

    fn relu(&mut self) {
        self.layers.push(Layer::Relu);
    }

    fn flatten(&mut self) {
        self.layers.push(Layer::Flatten);
        self.shape = vec![self.shape.iter().product()];
    }

    fn dense(&mut self, out: usize) {
        let params = LayerParams::uniform(vec![out, self.shape[0]], &mut self.rng);
        self.layers.push(Layer::Dense { params });
        self.shape = vec![out];
    }

    /// conv → relu → pool → conv → (relu) → pool → flatten.
    fn conv_block(&mut self, final_relu: bool) -> Result<(), ModelError> {
        let c = self.cfg.channels;
        self.conv(c)?;
        self.relu();
        self.pool()?;
        self.conv(c)?;
        if final_relu {
            self.relu();
        }
        self.pool()?;
        self.flatten();
        Ok(())
    }

    fn quantum_layer(
        &mut self,
        n_qubits: usize,
        embedding: Embedding,
        disregard: BTreeSet<usize>,
        trainable: bool,
    ) -> Result<QuantumLayer, ModelError> {
        let spec = QuantumLayerSpec::uniform(
            n_qubits,
            self.cfg.pqc_depth,
            self.cfg.rotation_axis,
            embedding,
            disregard,
            trainable,
        )?;
        let values = (0..spec.n_weights())
            .map(|_| self.rng.random_range(0.0..TAU))
            .collect();
        let weights = QuantumWeights::for_spec(&spec, values)?;
        Ok(QuantumLayer { spec, weights })
    }

    fn angle(&self) -> Embedding {
        Embedding::Angle(self.cfg.rotation_axis)
    }

    fn head(&mut self) {
        self.dense(1);
        self.layers.push(Layer::Sigmoid);
    }

    fn finish(self, variant: Variant, seed: u64) -> Result<ModelGraph, ModelError> {
        ModelGraph::new(variant, seed, self.cfg.input_width, self.layers)
    }
}

/// Builds `variant` with the default widths.
pub fn build_model(variant: Variant, seed: u64) -> Result<ModelGraph, ModelError> {
    build_model_with(variant, seed, &ModelConfig::default())
}

pub fn build_model_with(
    variant: Variant,
    seed: u64,
    cfg: &ModelConfig,
) -> Result<ModelGraph, ModelError> {
    let mut b = Builder::new(cfg, seed);
    match variant {
        Variant::Cnn => {
            b.conv_block(true)?;
            b.dense(cfg.hidden);
            b.relu();
        }
        Variant::QcnnAnE => {
            b.conv_block(true)?;
            b.dense(cfg.ane_qubits);
            let q = b.quantum_layer(cfg.ane_qubits, b.angle(), BTreeSet::new(), true)?;
            b.layers.push(Layer::Quantum(q));
            b.shape = vec![cfg.ane_qubits];
        }
        Variant::QcnnAmE => {
            // no ReLU before the embedding: an all-zero vector cannot be normalized
            b.conv_block(false)?;
            let width = 1 << cfg.ame_qubits;
            b.layers.push(Layer::TruncatePad { width });
            let q = b.quantum_layer(cfg.ame_qubits, Embedding::Amplitude, BTreeSet::new(), true)?;
            b.layers.push(Layer::Quantum(q));
            b.shape = vec![cfg.ame_qubits];
        }
        Variant::QcnnMlayer => {
            b.conv_block(true)?;
            b.dense(cfg.mlayer_groups * cfg.mlayer_qubits);
            let groups = (0..cfg.mlayer_groups)
                .map(|_| b.quantum_layer(cfg.mlayer_qubits, b.angle(), BTreeSet::new(), true))
                .collect::<Result<Vec<_>, _>>()?;
            b.layers.push(Layer::ParallelQuantum(groups));
            b.shape = vec![cfg.mlayer_groups * cfg.mlayer_qubits];
        }
        Variant::QuanConvCnn => {
            b.conv_block(true)?;
            b.dense(cfg.quanconv_qubits);
            if cfg.quanconv_disregarded >= cfg.quanconv_qubits {
                return Err(ModelError::Graph(
                    "quantum convolution must keep at least one qubit".into(),
                ));
            }
            let disregard: BTreeSet<usize> =
                sample(&mut b.rng, cfg.quanconv_qubits, cfg.quanconv_disregarded)
                    .into_iter()
                    .collect();
            let q = b.quantum_layer(cfg.quanconv_qubits, b.angle(), disregard, true)?;
            b.shape = vec![q.spec.n_outputs()];
            b.layers.push(Layer::Quantum(q));
        }
        Variant::QuanvolutionNn => {
            let q = b.quantum_layer(cfg.quanv_qubits, b.angle(), BTreeSet::new(), false)?;
            if !cfg.input_width.is_multiple_of(cfg.quanv_qubits) {
                return Err(ModelError::Graph(format!(
                    "input width {} not divisible by quanvolution window {}",
                    cfg.input_width, cfg.quanv_qubits
                )));
            }
            b.shape = vec![q.spec.n_outputs(), cfg.input_width / cfg.quanv_qubits];
            b.layers.push(Layer::Quanvolution(q));
            b.conv_block(true)?;
            b.dense(cfg.hidden);
            b.relu();
        }
    }
    b.head();
    b.finish(variant, seed)
}

/// Applies a frozen quanvolution circuit to a `[b, 1, L]` batch, giving `[b, channels, L / window]`.
pub fn quanvolution_preprocess(
    batch: &Tensor,
    spec: &QuantumLayerSpec,
    fixed_weights: &QuantumWeights,
) -> Result<Tensor, ModelError> {
    let layer = QuantumLayer {
        spec: spec.clone(),
        weights: fixed_weights.clone(),
    };
    quanvolve(batch, &layer)
}
