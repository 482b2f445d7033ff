//! Layer graph shared by all six detectors: an ordered list of classical and
//! quantum stages with forward evaluation, a recorded tape and reverse-mode
//! backward pass.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::nn::{
    bce_logit_grad, bce_loss, conv1d_backward, conv1d_forward, conv_output_len, dense_backward,
    dense_forward, maxpool1d, maxpool1d_backward, relu_backward, relu_forward, sigmoid_forward,
    LayerParams, ParamBlock, Tensor,
};
use crate::quantum::{circuit_jacobian, run_circuit, QuantumLayerSpec, QuantumWeights};

use super::{ModelError, Variant};

/// A quantum stage: blueprint plus its rotation weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumLayer {
    pub spec: QuantumLayerSpec,
    pub weights: QuantumWeights,
}

impl QuantumLayer {
    fn input_width(&self) -> usize {
        self.spec.max_input_width()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "config", rename_all = "snake_case")]
pub enum Layer {
    Conv1d {
        params: LayerParams,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    MaxPool {
        window: usize,
    },
    Flatten,
    Dense {
        params: LayerParams,
    },
    /// Keeps the first `width` values of each sample, zero-padding short inputs.
    TruncatePad {
        width: usize,
    },
    /// One circuit per sample; outputs the measured expectations.
    Quantum(QuantumLayer),
    /// Splits each sample into consecutive groups, one circuit per group, and
    /// concatenates the measured expectations.
    ParallelQuantum(Vec<QuantumLayer>),
    /// Slides a circuit over non-overlapping windows of a `[1, L]` sample; each
    /// measured qubit becomes one output channel.
    Quanvolution(QuantumLayer),
    Sigmoid,
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv1d { .. } => "conv1d",
            Layer::Relu => "relu",
            Layer::MaxPool { .. } => "maxpool1d",
            Layer::Flatten => "flatten",
            Layer::Dense { .. } => "dense",
            Layer::TruncatePad { .. } => "truncate_pad",
            Layer::Quantum(_) => "quantum",
            Layer::ParallelQuantum(_) => "parallel_quantum",
            Layer::Quanvolution(_) => "quanvolution",
            Layer::Sigmoid => "sigmoid",
        }
    }

    /// Per-sample output shape, or a description of the mismatch.
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, String> {
        match self {
            Layer::Conv1d {
                params,
                kernel,
                stride,
                padding,
            } => {
                let &[c, len] = input else {
                    return Err(format!("expects [channels, length], got {input:?}"));
                };
                if params.weight_shape[1] != c {
                    return Err(format!(
                        "expects {} input channels, got {c}",
                        params.weight_shape[1]
                    ));
                }
                let out = conv_output_len(len, *kernel, *stride, *padding)
                    .ok_or_else(|| format!("kernel {kernel} too large for length {len}"))?;
                Ok(vec![params.weight_shape[0], out])
            }
            Layer::MaxPool { window } => {
                let &[c, len] = input else {
                    return Err(format!("expects [channels, length], got {input:?}"));
                };
                if *window == 0 || *window > len {
                    return Err(format!("window {window} invalid for length {len}"));
                }
                Ok(vec![c, len / window])
            }
            Layer::Relu | Layer::Sigmoid => Ok(input.to_vec()),
            Layer::Flatten => Ok(vec![input.iter().product()]),
            Layer::Dense { params } => match input {
                &[n] if n == params.weight_shape[1] => Ok(vec![params.weight_shape[0]]),
                _ => Err(format!(
                    "expects width {}, got {input:?}",
                    params.weight_shape[1]
                )),
            },
            Layer::TruncatePad { width } => match input {
                [_] => Ok(vec![*width]),
                _ => Err(format!("expects a flat input, got {input:?}")),
            },
            Layer::Quantum(q) => match input {
                &[n] if n >= 1 && n <= q.input_width() => Ok(vec![q.spec.n_outputs()]),
                _ => Err(format!(
                    "embedding accepts 1..={} features, got {input:?}",
                    q.input_width()
                )),
            },
            Layer::ParallelQuantum(groups) => {
                let total: usize = groups.iter().map(QuantumLayer::input_width).sum();
                match input {
                    &[n] if n == total => {
                        Ok(vec![groups.iter().map(|g| g.spec.n_outputs()).sum()])
                    }
                    _ => Err(format!("expects width {total}, got {input:?}")),
                }
            }
            Layer::Quanvolution(q) => {
                let window = q.input_width();
                match *input {
                    [1, len] if len.is_multiple_of(window) => Ok(vec![q.spec.n_outputs(), len / window]),
                    [1, len] => Err(format!("length {len} not divisible by window {window}")),
                    _ => Err(format!("expects [1, length], got {input:?}")),
                }
            }
        }
    }

    fn is_trainable(&self) -> bool {
        match self {
            Layer::Conv1d { .. } | Layer::Dense { .. } => true,
            Layer::Quantum(q) | Layer::Quanvolution(q) => q.spec.trainable(),
            Layer::ParallelQuantum(gs) => gs.iter().any(|g| g.spec.trainable()),
            _ => false,
        }
    }

    fn blocks(&self) -> Vec<&[f64]> {
        match self {
            Layer::Conv1d { params, .. } | Layer::Dense { params } => {
                vec![&params.weights, &params.biases]
            }
            Layer::Quantum(q) | Layer::Quanvolution(q) if q.spec.trainable() => {
                vec![q.weights.values()]
            }
            Layer::ParallelQuantum(gs) => gs
                .iter()
                .filter(|g| g.spec.trainable())
                .map(|g| g.weights.values())
                .collect(),
            _ => Vec::new(),
        }
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Layer::Conv1d { params, .. } | Layer::Dense { params } => {
                vec![&mut params.weights, &mut params.biases]
            }
            Layer::Quantum(q) | Layer::Quanvolution(q) if q.spec.trainable() => {
                vec![q.weights.values_mut()]
            }
            Layer::ParallelQuantum(gs) => gs
                .iter_mut()
                .filter(|g| g.spec.trainable())
                .map(|g| g.weights.values_mut())
                .collect(),
            _ => Vec::new(),
        }
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor, ModelError> {
        Ok(match self {
            Layer::Conv1d {
                params,
                kernel,
                stride,
                padding,
            } => conv1d_forward(x, params, *kernel, *stride, *padding)?,
            Layer::Relu => relu_forward(x),
            Layer::MaxPool { window } => maxpool1d(x, *window)?,
            Layer::Flatten => x.clone().flatten(),
            Layer::Dense { params } => dense_forward(x, params)?,
            Layer::TruncatePad { width } => {
                let b = x.batch();
                let n = x.sample_len();
                let mut out = vec![0.0; b * width];
                for s in 0..b {
                    let k = n.min(*width);
                    out[s * width..s * width + k].copy_from_slice(&x.sample(s)[..k]);
                }
                Tensor::new(vec![b, *width], out)?
            }
            Layer::Quantum(q) => {
                let b = x.batch();
                let mut out = Vec::with_capacity(b * q.spec.n_outputs());
                for s in 0..b {
                    out.extend(run_circuit(x.sample(s), &q.spec, &q.weights)?);
                }
                Tensor::new(vec![b, q.spec.n_outputs()], out)?
            }
            Layer::ParallelQuantum(groups) => {
                let b = x.batch();
                let width: usize = groups.iter().map(|g| g.spec.n_outputs()).sum();
                let mut out = Vec::with_capacity(b * width);
                for s in 0..b {
                    let sample = x.sample(s);
                    let mut off = 0;
                    for g in groups {
                        let w = g.input_width();
                        out.extend(run_circuit(&sample[off..off + w], &g.spec, &g.weights)?);
                        off += w;
                    }
                }
                Tensor::new(vec![b, width], out)?
            }
            Layer::Quanvolution(q) => quanvolve(x, q)?,
            Layer::Sigmoid => sigmoid_forward(x),
        })
    }

    /// Returns the input gradient (when requested) and one gradient per parameter block.
    fn backward(
        &self,
        x: &Tensor,
        grad_out: &Tensor,
        need_input_grad: bool,
    ) -> Result<(Option<Tensor>, Vec<Vec<f64>>), ModelError> {
        match self {
            Layer::Conv1d {
                params,
                kernel,
                stride,
                padding,
            } => {
                let (dx, g) = conv1d_backward(x, params, *kernel, *stride, *padding, grad_out)?;
                Ok((Some(dx), vec![g.weights, g.biases]))
            }
            Layer::Dense { params } => {
                let (dx, g) = dense_backward(x, params, grad_out)?;
                Ok((Some(dx), vec![g.weights, g.biases]))
            }
            Layer::Relu => Ok((Some(relu_backward(x, grad_out)), Vec::new())),
            Layer::MaxPool { window } => {
                Ok((Some(maxpool1d_backward(x, *window, grad_out)?), Vec::new()))
            }
            Layer::Flatten => Ok((
                Some(grad_out.clone().reshape(x.shape().to_vec())?),
                Vec::new(),
            )),
            Layer::TruncatePad { width } => {
                let b = x.batch();
                let n = x.sample_len();
                let mut dx = vec![0.0; b * n];
                for s in 0..b {
                    let k = n.min(*width);
                    dx[s * n..s * n + k].copy_from_slice(&grad_out.sample(s)[..k]);
                }
                Ok((Some(Tensor::new(x.shape().to_vec(), dx)?), Vec::new()))
            }
            Layer::Quantum(q) => {
                let b = x.batch();
                let n = x.sample_len();
                let mut dw = vec![0.0; q.spec.n_weights()];
                let mut dx = vec![0.0; b * n];
                for s in 0..b {
                    let jac = circuit_jacobian(x.sample(s), &q.spec, &q.weights)?;
                    let (gw, gx) = jac.pullback(grad_out.sample(s));
                    accumulate(&mut dw, &gw);
                    dx[s * n..(s + 1) * n].copy_from_slice(&gx);
                }
                let blocks = if q.spec.trainable() { vec![dw] } else { Vec::new() };
                Ok((Some(Tensor::new(x.shape().to_vec(), dx)?), blocks))
            }
            Layer::ParallelQuantum(groups) => {
                let b = x.batch();
                let n = x.sample_len();
                let mut dws: Vec<Vec<f64>> = groups
                    .iter()
                    .map(|g| vec![0.0; g.spec.n_weights()])
                    .collect();
                let mut dx = vec![0.0; b * n];
                for s in 0..b {
                    let sample = x.sample(s);
                    let go = grad_out.sample(s);
                    let (mut off_in, mut off_out) = (0, 0);
                    for (g, dw) in groups.iter().zip(dws.iter_mut()) {
                        let w = g.input_width();
                        let m = g.spec.n_outputs();
                        let jac = circuit_jacobian(&sample[off_in..off_in + w], &g.spec, &g.weights)?;
                        let (gw, gx) = jac.pullback(&go[off_out..off_out + m]);
                        accumulate(dw, &gw);
                        dx[s * n + off_in..s * n + off_in + w].copy_from_slice(&gx);
                        off_in += w;
                        off_out += m;
                    }
                }
                let blocks = groups
                    .iter()
                    .zip(dws)
                    .filter(|(g, _)| g.spec.trainable())
                    .map(|(_, dw)| dw)
                    .collect();
                Ok((Some(Tensor::new(x.shape().to_vec(), dx)?), blocks))
            }
            Layer::Quanvolution(q) => {
                let window = q.input_width();
                let n_out = q.spec.n_outputs();
                let (b, len) = (x.batch(), x.sample_len());
                let positions = len / window;
                let mut dw = vec![0.0; q.spec.n_weights()];
                let mut dx = vec![0.0; b * len];
                if need_input_grad || q.spec.trainable() {
                    for s in 0..b {
                        let sample = x.sample(s);
                        let go = grad_out.sample(s);
                        for p in 0..positions {
                            let jac = circuit_jacobian(
                                &sample[p * window..(p + 1) * window],
                                &q.spec,
                                &q.weights,
                            )?;
                            let upstream: Vec<f64> =
                                (0..n_out).map(|c| go[c * positions + p]).collect();
                            let (gw, gx) = jac.pullback(&upstream);
                            accumulate(&mut dw, &gw);
                            dx[s * len + p * window..s * len + (p + 1) * window]
                                .copy_from_slice(&gx);
                        }
                    }
                }
                let blocks = if q.spec.trainable() { vec![dw] } else { Vec::new() };
                Ok((Some(Tensor::new(x.shape().to_vec(), dx)?), blocks))
            }
            Layer::Sigmoid => Err(ModelError::Graph(
                "sigmoid backward is fused with the loss".into(),
            )),
        }
    }
}

fn accumulate(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Runs the quanvolution circuit over every window of a `[b, 1, L]` batch.
pub(crate) fn quanvolve(x: &Tensor, q: &QuantumLayer) -> Result<Tensor, ModelError> {
    let window = q.input_width();
    let n_out = q.spec.n_outputs();
    let &[b, 1, len] = x.shape() else {
        return Err(ModelError::Graph(format!(
            "quanvolution expects [batch, 1, length], got {:?}",
            x.shape()
        )));
    };
    if len % window != 0 {
        return Err(ModelError::Graph(format!(
            "quanvolution length {len} not divisible by window {window}"
        )));
    }
    let positions = len / window;
    let mut out = vec![0.0; b * n_out * positions];
    for s in 0..b {
        let sample = x.sample(s);
        for p in 0..positions {
            let ev = run_circuit(&sample[p * window..(p + 1) * window], &q.spec, &q.weights)?;
            for (c, v) in ev.into_iter().enumerate() {
                out[(s * n_out + c) * positions + p] = v;
            }
        }
    }
    Ok(Tensor::new(vec![b, n_out, positions], out)?)
}

/// Layer inputs recorded during a forward pass; `inputs[i]` fed layer `start + i`.
#[derive(Debug, Clone)]
pub struct Tape {
    start: usize,
    inputs: Vec<Tensor>,
}

/// Gradients for every parameter block, grouped per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub layers: Vec<Vec<Vec<f64>>>,
}

impl ModelGrads {
    fn add_assign(&mut self, other: &ModelGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.iter_mut().zip(b) {
                accumulate(x, y);
            }
        }
    }

    /// All gradient values in parameter-block order.
    pub fn flat(&self) -> Vec<f64> {
        self.layers.iter().flatten().flatten().copied().collect()
    }
}

/// Result of one loss evaluation with gradients.
#[derive(Debug, Clone)]
pub struct LossGrads {
    pub loss: f64,
    pub probs: Vec<f64>,
    pub grads: ModelGrads,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelGraph {
    pub(crate) variant: Variant,
    pub(crate) seed: u64,
    pub(crate) input_width: usize,
    pub(crate) layers: Vec<Layer>,
}

impl ModelGraph {
    /// Validates widths and the single terminal sigmoid unit.
    pub fn new(
        variant: Variant,
        seed: u64,
        input_width: usize,
        layers: Vec<Layer>,
    ) -> Result<Self, ModelError> {
        let graph = Self {
            variant,
            seed,
            input_width,
            layers,
        };
        graph.validate()?;
        Ok(graph)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let sigmoids = self
            .layers
            .iter()
            .filter(|l| matches!(l, Layer::Sigmoid))
            .count();
        if sigmoids != 1 || !matches!(self.layers.last(), Some(Layer::Sigmoid)) {
            return Err(ModelError::Graph(
                "graph must end in exactly one sigmoid".into(),
            ));
        }
        let mut shape = vec![1, self.input_width];
        for (i, layer) in self.layers.iter().enumerate() {
            shape = layer.output_shape(&shape).map_err(|msg| {
                ModelError::Graph(format!("layer {i} ({}): {msg}", layer.name()))
            })?;
        }
        if shape != [1] {
            return Err(ModelError::Graph(format!(
                "prediction head emits {shape:?}, expected a single unit"
            )));
        }
        Ok(())
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Per-sample shape entering layer `index` (`index == len` gives the output).
    pub fn shape_before(&self, index: usize) -> Vec<usize> {
        let mut shape = vec![1, self.input_width];
        for layer in &self.layers[..index] {
            shape = layer
                .output_shape(&shape)
                .expect("widths validated at construction");
        }
        shape
    }

    pub fn quantum_layers(&self) -> Vec<&QuantumLayer> {
        self.layers
            .iter()
            .flat_map(|l| match l {
                Layer::Quantum(q) | Layer::Quanvolution(q) => vec![q],
                Layer::ParallelQuantum(gs) => gs.iter().collect(),
                _ => Vec::new(),
            })
            .collect()
    }

    pub fn total_qubits(&self) -> usize {
        self.quantum_layers().iter().map(|q| q.spec.n_qubits()).sum()
    }

    /// Qubits left unmeasured by the quantum-convolution stage, if any.
    pub fn disregard_set(&self) -> Option<Vec<usize>> {
        self.quantum_layers()
            .into_iter()
            .find(|q| !q.spec.disregard().is_empty())
            .map(|q| q.spec.disregard().iter().copied().collect())
    }

    pub fn pqc_depth(&self) -> Option<usize> {
        self.quantum_layers().first().map(|q| q.spec.n_pqc_layers())
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .flat_map(Layer::blocks)
            .map(<[f64]>::len)
            .sum()
    }

    /// Number of leading layers without trainable parameters whose output can
    /// be computed once per dataset. Only a frozen quanvolution qualifies.
    pub fn frozen_prefix(&self) -> usize {
        match self.layers.first() {
            Some(layer @ Layer::Quanvolution(_)) if !layer.is_trainable() => 1,
            _ => 0,
        }
    }

    /// Parameter arrays in block order (layer order, weights before biases).
    pub fn param_blocks(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(Layer::blocks).collect()
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(Layer::blocks_mut).collect()
    }

    /// Labels matching [`Self::param_blocks`], e.g. `"layer 4 (dense) weights"`.
    pub fn block_labels(&self) -> Vec<String> {
        let mut labels = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let n = layer.blocks().len();
            for b in 0..n {
                let part = match layer {
                    Layer::Conv1d { .. } | Layer::Dense { .. } => {
                        if b == 0 { "weights".to_string() } else { "biases".to_string() }
                    }
                    Layer::ParallelQuantum(_) => format!("group {b} weights"),
                    _ => "weights".to_string(),
                };
                labels.push(format!("layer {i} ({}) {part}", layer.name()));
            }
        }
        labels
    }

    /// Reshapes a `[b, width]` batch to `[b, 1, width]` when the first layer is convolutional.
    fn prepare_input(&self, batch: &Tensor) -> Result<Tensor, ModelError> {
        match batch.shape() {
            &[b, w] if w == self.input_width => Ok(batch.clone().reshape(vec![b, 1, w])?),
            &[_, 1, w] if w == self.input_width => Ok(batch.clone()),
            other => Err(ModelError::Graph(format!(
                "batch shape {other:?} does not match input width {}",
                self.input_width
            ))),
        }
    }

    /// Probabilities `[b, 1]` for a `[b, input_width]` batch.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor, ModelError> {
        let x = self.prepare_input(batch)?;
        self.forward_range(0, self.layers.len(), &x)
    }

    /// Applies layers `from..to` to `x`; layer 0 takes `[b, 1, input_width]`.
    pub fn forward_range(&self, from: usize, to: usize, x: &Tensor) -> Result<Tensor, ModelError> {
        let mut cur = x.clone();
        for layer in &self.layers[from..to] {
            cur = layer.forward(&cur)?;
        }
        Ok(cur)
    }

    /// Output of the frozen prefix for a raw `[b, input_width]` batch.
    pub fn frozen_features(&self, batch: &Tensor) -> Result<Tensor, ModelError> {
        let x = self.prepare_input(batch)?;
        self.forward_range(0, self.frozen_prefix(), &x)
    }

    /// Forward from layer `start` up to (excluding) the sigmoid, recording a tape.
    /// Returns the logits.
    fn forward_tape(&self, start: usize, x: &Tensor) -> Result<(Tensor, Tape), ModelError> {
        let end = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(end - start);
        let mut cur = x.clone();
        for layer in &self.layers[start..end] {
            let next = layer.forward(&cur)?;
            inputs.push(std::mem::replace(&mut cur, next));
        }
        Ok((cur, Tape { start, inputs }))
    }

    /// Reverse pass from the logit gradient back through the tape.
    fn backward(&self, tape: &Tape, grad_logits: Tensor) -> Result<ModelGrads, ModelError> {
        let mut layers: Vec<Vec<Vec<f64>>> = self
            .layers
            .iter()
            .map(|l| l.blocks().iter().map(|b| vec![0.0; b.len()]).collect())
            .collect();
        let mut grad = grad_logits;
        for (offset, x) in tape.inputs.iter().enumerate().rev() {
            let index = tape.start + offset;
            let layer = &self.layers[index];
            let need_input = offset > 0;
            let (dx, blocks) = layer.backward(x, &grad, need_input)?;
            if layer.blocks().len() == blocks.len() {
                layers[index] = blocks;
            }
            match dx {
                Some(dx) if need_input => grad = dx,
                _ => break,
            }
        }
        Ok(ModelGrads { layers })
    }

    /// Mean BCE loss and its gradient for a batch entering at layer `start`.
    ///
    /// Samples are processed in parallel and reduced in sample order, so the
    /// result does not depend on the thread count.
    pub fn loss_and_grads_from(
        &self,
        start: usize,
        batch: &Tensor,
        labels: &[f64],
    ) -> Result<LossGrads, ModelError> {
        let b = batch.batch();
        if labels.len() != b || b == 0 {
            return Err(ModelError::Graph(format!(
                "{} labels for batch of {b}",
                labels.len()
            )));
        }
        let per_sample: Vec<Result<(f64, ModelGrads), ModelError>> = (0..b)
            .into_par_iter()
            .map(|s| {
                let x = batch.select(&[s]);
                let (logit, tape) = self.forward_tape(start, &x)?;
                let p = crate::nn::sigmoid(logit.data()[0]);
                let g = bce_logit_grad(&[p], &[labels[s]])[0] / b as f64;
                let grads = self.backward(&tape, Tensor::new(vec![1, 1], vec![g])?)?;
                Ok((p, grads))
            })
            .collect();
        let mut probs = Vec::with_capacity(b);
        let mut total: Option<ModelGrads> = None;
        for r in per_sample {
            let (p, g) = r?;
            probs.push(p);
            match total.as_mut() {
                Some(t) => t.add_assign(&g),
                None => total = Some(g),
            }
        }
        Ok(LossGrads {
            loss: bce_loss(&probs, labels),
            probs,
            grads: total.expect("non-empty batch"),
        })
    }

    /// [`Self::loss_and_grads_from`] on a raw `[b, input_width]` batch.
    pub fn loss_and_grads(&self, batch: &Tensor, labels: &[f64]) -> Result<LossGrads, ModelError> {
        let x = self.prepare_input(batch)?;
        self.loss_and_grads_from(0, &x, labels)
    }

    /// Mean BCE loss only; used by finite-difference checks.
    pub fn loss(&self, batch: &Tensor, labels: &[f64]) -> Result<f64, ModelError> {
        let probs = self.forward(batch)?;
        Ok(bce_loss(probs.data(), labels))
    }

    /// Probabilities for inputs entering at layer `start`, evaluated in
    /// parallel chunks.
    pub fn predict_from(&self, start: usize, inputs: &Tensor) -> Result<Vec<f64>, ModelError> {
        const CHUNK: usize = 256;
        let n = inputs.batch();
        let chunks: Vec<Result<Vec<f64>, ModelError>> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let rows: Vec<usize> = (c * CHUNK..((c + 1) * CHUNK).min(n)).collect();
                let out = self.forward_range(start, self.layers.len(), &inputs.select(&rows))?;
                Ok(out.into_data())
            })
            .collect();
        let mut probs = Vec::with_capacity(n);
        for c in chunks {
            probs.extend(c?);
        }
        Ok(probs)
    }

    /// Applies one optimizer step with the given gradients.
    pub fn apply_grads(
        &mut self,
        grads: &ModelGrads,
        optimizer: &mut crate::nn::OptimizerState,
    ) -> Result<(), ModelError> {
        let labels = self.block_labels();
        let flat_grads: Vec<&Vec<f64>> = grads.layers.iter().flatten().collect();
        let values = self.param_blocks_mut();
        if values.len() != flat_grads.len() {
            return Err(ModelError::Graph("gradient layout mismatch".into()));
        }
        let mut blocks: Vec<ParamBlock<'_>> = values
            .into_iter()
            .zip(flat_grads)
            .zip(labels)
            .map(|((values, grads), label)| ParamBlock {
                label,
                values,
                grads,
            })
            .collect();
        optimizer
            .step(&mut blocks)
            .map_err(|e| ModelError::Training(e.to_string()))
    }
}
