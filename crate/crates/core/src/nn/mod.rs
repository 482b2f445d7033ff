//! Minimal classical network engine: 1D convolution, pooling, dense layers,
//! activations, binary cross-entropy and first-order optimizers.

mod layers;
mod optim;
mod tensor;

use thiserror::Error;

pub use layers::{
    bce, bce_logit_grad, bce_loss, conv1d_backward, conv1d_forward, conv_output_len,
    dense_backward, dense_forward, maxpool1d, maxpool1d_backward, relu, relu_backward,
    relu_forward, sigmoid, sigmoid_forward, LayerGrads, LayerParams, BCE_EPSILON,
};
pub use optim::{OptimizerKind, OptimizerState, ParamBlock};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}
