//! Forward and backward kernels for the classical layers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NnError, Tensor};

/// Lower clamp applied to probabilities before taking logarithms.
pub const BCE_EPSILON: f64 = 1e-7;

/// Weights and biases of a convolution or dense layer.
///
/// Convolution weights are `[c_out, c_in, kernel]`; dense weights are `[out, in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weight_shape: Vec<usize>,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Gradient buffers shaped like a [`LayerParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerParams {
    pub fn new(weight_shape: Vec<usize>, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self, NnError> {
        if weight_shape.iter().product::<usize>() != weights.len() {
            return Err(NnError::Shape(format!(
                "weight shape {weight_shape:?} vs {} values",
                weights.len()
            )));
        }
        if biases.len() != weight_shape[0] {
            return Err(NnError::Shape(format!(
                "{} biases for {} outputs",
                biases.len(),
                weight_shape[0]
            )));
        }
        Ok(Self {
            weight_shape,
            weights,
            biases,
        })
    }

    /// Uniform init in `±sqrt(1/fan_in)` for weights and biases.
    pub fn uniform<R: Rng>(weight_shape: Vec<usize>, rng: &mut R) -> Self {
        let fan_in: usize = weight_shape[1..].iter().product();
        let bound = (1.0 / fan_in as f64).sqrt();
        let n: usize = weight_shape.iter().product();
        let weights = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
        let biases = (0..weight_shape[0])
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Self {
            weight_shape,
            weights,
            biases,
        }
    }

    pub fn zero_grads(&self) -> LayerGrads {
        LayerGrads {
            weights: vec![0.0; self.weights.len()],
            biases: vec![0.0; self.biases.len()],
        }
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

pub fn conv_output_len(len: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = len + 2 * padding;
    if stride == 0 || kernel == 0 || padded < kernel {
        None
    } else {
        Some((padded - kernel) / stride + 1)
    }
}

fn conv_dims(
    input: &Tensor,
    params: &LayerParams,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Result<(usize, usize, usize, usize, usize), NnError> {
    let &[b, c_in, len] = input.shape() else {
        return Err(NnError::Shape(format!(
            "conv1d expects [batch, channels, length], got {:?}",
            input.shape()
        )));
    };
    let &[c_out, w_in, k] = params.weight_shape.as_slice() else {
        return Err(NnError::Shape("conv1d weights must be rank 3".into()));
    };
    if w_in != c_in || k != kernel {
        return Err(NnError::Shape(format!(
            "conv1d weights {:?} vs input channels {c_in}, kernel {kernel}",
            params.weight_shape
        )));
    }
    let out_len = conv_output_len(len, kernel, stride, padding).ok_or_else(|| {
        NnError::Shape(format!(
            "kernel {kernel} larger than padded length {}",
            len + 2 * padding
        ))
    })?;
    Ok((b, c_in, len, c_out, out_len))
}

/// 1D cross-correlation plus bias.
pub fn conv1d_forward(
    input: &Tensor,
    params: &LayerParams,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Result<Tensor, NnError> {
    let (b, c_in, len, c_out, out_len) = conv_dims(input, params, kernel, stride, padding)?;
    let x = input.data();
    let w = &params.weights;
    let mut out = vec![0.0; b * c_out * out_len];
    for n in 0..b {
        for o in 0..c_out {
            let dst = &mut out[(n * c_out + o) * out_len..(n * c_out + o + 1) * out_len];
            dst.fill(params.biases[o]);
            for c in 0..c_in {
                let src = &x[(n * c_in + c) * len..(n * c_in + c + 1) * len];
                let wk = &w[(o * c_in + c) * kernel..(o * c_in + c + 1) * kernel];
                for (t, d) in dst.iter_mut().enumerate() {
                    let start = (t * stride) as isize - padding as isize;
                    let mut acc = 0.0;
                    for (j, wv) in wk.iter().enumerate() {
                        let pos = start + j as isize;
                        if pos >= 0 && (pos as usize) < len {
                            acc += wv * src[pos as usize];
                        }
                    }
                    *d += acc;
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![b, c_out, out_len], out))
}

/// Returns the input gradient and the parameter gradients of [`conv1d_forward`].
pub fn conv1d_backward(
    input: &Tensor,
    params: &LayerParams,
    kernel: usize,
    stride: usize,
    padding: usize,
    grad_out: &Tensor,
) -> Result<(Tensor, LayerGrads), NnError> {
    let (b, c_in, len, c_out, out_len) = conv_dims(input, params, kernel, stride, padding)?;
    if grad_out.shape() != [b, c_out, out_len] {
        return Err(NnError::Shape("conv1d upstream gradient shape".into()));
    }
    let x = input.data();
    let g = grad_out.data();
    let mut grads = params.zero_grads();
    let mut dx = vec![0.0; x.len()];
    for n in 0..b {
        for o in 0..c_out {
            let go = &g[(n * c_out + o) * out_len..(n * c_out + o + 1) * out_len];
            grads.biases[o] += go.iter().sum::<f64>();
            for c in 0..c_in {
                let src = (n * c_in + c) * len;
                let wbase = (o * c_in + c) * kernel;
                for (t, &gv) in go.iter().enumerate() {
                    let start = (t * stride) as isize - padding as isize;
                    for j in 0..kernel {
                        let pos = start + j as isize;
                        if pos >= 0 && (pos as usize) < len {
                            let p = src + pos as usize;
                            grads.weights[wbase + j] += gv * x[p];
                            dx[p] += gv * params.weights[wbase + j];
                        }
                    }
                }
            }
        }
    }
    Ok((Tensor::from_parts(input.shape().to_vec(), dx), grads))
}

fn pool_dims(input: &Tensor, window: usize) -> Result<(usize, usize, usize, usize), NnError> {
    let &[b, c, len] = input.shape() else {
        return Err(NnError::Shape(format!(
            "maxpool1d expects [batch, channels, length], got {:?}",
            input.shape()
        )));
    };
    if window == 0 || window > len {
        return Err(NnError::Shape(format!(
            "pool window {window} invalid for length {len}"
        )));
    }
    Ok((b, c, len, len / window))
}

/// Non-overlapping max pooling; a trailing partial window is dropped.
pub fn maxpool1d(input: &Tensor, window: usize) -> Result<Tensor, NnError> {
    let (b, c, len, out_len) = pool_dims(input, window)?;
    let x = input.data();
    let mut out = Vec::with_capacity(b * c * out_len);
    for row in 0..b * c {
        let src = &x[row * len..(row + 1) * len];
        for t in 0..out_len {
            let win = &src[t * window..(t + 1) * window];
            out.push(win.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
    }
    Ok(Tensor::from_parts(vec![b, c, out_len], out))
}

/// Routes each upstream value to the first maximal element of its window.
pub fn maxpool1d_backward(input: &Tensor, window: usize, grad_out: &Tensor) -> Result<Tensor, NnError> {
    let (b, c, len, out_len) = pool_dims(input, window)?;
    if grad_out.shape() != [b, c, out_len] {
        return Err(NnError::Shape("maxpool1d upstream gradient shape".into()));
    }
    let x = input.data();
    let g = grad_out.data();
    let mut dx = vec![0.0; x.len()];
    for row in 0..b * c {
        for t in 0..out_len {
            let base = row * len + t * window;
            let mut best = base;
            for i in base + 1..base + window {
                if x[i] > x[best] {
                    best = i;
                }
            }
            dx[best] += g[row * out_len + t];
        }
    }
    Ok(Tensor::from_parts(input.shape().to_vec(), dx))
}

fn dense_dims(input: &Tensor, params: &LayerParams) -> Result<(usize, usize, usize), NnError> {
    let &[b, n] = input.shape() else {
        return Err(NnError::Shape(format!(
            "dense expects [batch, width], got {:?}",
            input.shape()
        )));
    };
    let &[m, wn] = params.weight_shape.as_slice() else {
        return Err(NnError::Shape("dense weights must be rank 2".into()));
    };
    if wn != n {
        return Err(NnError::Shape(format!(
            "dense weights [{m}, {wn}] vs input width {n}"
        )));
    }
    Ok((b, n, m))
}

/// `input · Wᵀ + bias`.
pub fn dense_forward(input: &Tensor, params: &LayerParams) -> Result<Tensor, NnError> {
    let (b, n, m) = dense_dims(input, params)?;
    let mut out = Vec::with_capacity(b * m);
    for s in 0..b {
        let x = input.sample(s);
        for o in 0..m {
            let w = &params.weights[o * n..(o + 1) * n];
            out.push(params.biases[o] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>());
        }
    }
    Ok(Tensor::from_parts(vec![b, m], out))
}

pub fn dense_backward(
    input: &Tensor,
    params: &LayerParams,
    grad_out: &Tensor,
) -> Result<(Tensor, LayerGrads), NnError> {
    let (b, n, m) = dense_dims(input, params)?;
    if grad_out.shape() != [b, m] {
        return Err(NnError::Shape("dense upstream gradient shape".into()));
    }
    let mut grads = params.zero_grads();
    let mut dx = vec![0.0; b * n];
    for s in 0..b {
        let x = input.sample(s);
        let go = grad_out.sample(s);
        let dxs = &mut dx[s * n..(s + 1) * n];
        for (o, &gv) in go.iter().enumerate() {
            grads.biases[o] += gv;
            let w = &params.weights[o * n..(o + 1) * n];
            let gw = &mut grads.weights[o * n..(o + 1) * n];
            for i in 0..n {
                gw[i] += gv * x[i];
                dxs[i] += gv * w[i];
            }
        }
    }
    Ok((Tensor::from_parts(vec![b, n], dx), grads))
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn relu_forward(input: &Tensor) -> Tensor {
    Tensor::from_parts(
        input.shape().to_vec(),
        input.data().iter().map(|&v| relu(v)).collect(),
    )
}

pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Tensor {
    Tensor::from_parts(
        input.shape().to_vec(),
        input
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
            .collect(),
    )
}

pub fn sigmoid_forward(input: &Tensor) -> Tensor {
    Tensor::from_parts(
        input.shape().to_vec(),
        input.data().iter().map(|&v| sigmoid(v)).collect(),
    )
}

/// Binary cross-entropy for one prediction, with `p` clamped to `[ε, 1−ε]`.
pub fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Mean binary cross-entropy over a batch.
pub fn bce_loss(probs: &[f64], labels: &[f64]) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    probs.iter().zip(labels).map(|(&p, &y)| bce(p, y)).sum::<f64>() / probs.len() as f64
}

/// Gradient of the mean loss with respect to the pre-sigmoid logits, `(p − y)/batch`.
///
/// This is the exact derivative of the unclamped loss; the clamp only guards
/// the reported value against `ln 0`.
pub fn bce_logit_grad(probs: &[f64], labels: &[f64]) -> Vec<f64> {
    let n = probs.len() as f64;
    probs.iter().zip(labels).map(|(&p, &y)| (p - y) / n).collect()
}
