//! Exact dense statevector simulation of the hybrid models' quantum layers.

mod circuit;
mod statevector;

use thiserror::Error;

pub use circuit::{
    amplitude_embed, angle_embed, circuit_jacobian, parameter_shift_grad, pqc_layer, run_circuit,
    CircuitJacobian, Embedding, Entangler, QuantumLayerSpec, QuantumWeights,
};
pub use statevector::{rotation_matrix, Axis, Statevector, MAX_QUBITS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("register of {requested} qubits outside supported range 1..={max}")]
    Capacity { requested: usize, max: usize },
    #[error("qubit {qubit} out of range for {n_qubits}-qubit register")]
    QubitIndex { qubit: usize, n_qubits: usize },
    #[error("CNOT control and target are both qubit {0}")]
    ControlIsTarget(usize),
    #[error("{got} features exceed embedding capacity {capacity}")]
    Width { got: usize, capacity: usize },
    #[error("cannot amplitude-embed an all-zero feature vector")]
    ZeroNorm,
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid layer spec: {0}")]
    Spec(String),
    #[error("weight index {index} out of range ({len} weights)")]
    WeightIndex { index: usize, len: usize },
    #[error("gradient requested for a non-trainable quantum layer")]
    NotTrainable,
}
