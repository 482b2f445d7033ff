//! Layer blueprints, embeddings, the rotation + CNOT-ring PQC, and analytic
//! gradients of the measured Pauli-Z expectations.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::statevector::{Axis, Statevector, MAX_QUBITS};
use super::QuantumError;

/// How classical features enter the register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Embedding {
    /// One feature per qubit, used as a rotation angle in radians.
    Angle(Axis),
    /// Up to `2^n` features written into the amplitudes after L2 normalization.
    Amplitude,
}

/// Entangling pattern that follows each rotation layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Entangler {
    /// `CNOT(i -> i+1 mod n)` for every qubit `i`, in ascending order.
    #[default]
    ClosedRing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantumLayerSpec {
    n_qubits: usize,
    /// Rotation axis of each PQC layer; its length is the circuit depth.
    rotation_axes: Vec<Axis>,
    embedding: Embedding,
    entangler: Entangler,
    disregard: BTreeSet<usize>,
    trainable: bool,
}

impl QuantumLayerSpec {
    pub fn new(
        n_qubits: usize,
        rotation_axes: Vec<Axis>,
        embedding: Embedding,
        disregard: BTreeSet<usize>,
        trainable: bool,
    ) -> Result<Self, QuantumError> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(QuantumError::Capacity {
                requested: n_qubits,
                max: MAX_QUBITS,
            });
        }
        if rotation_axes.is_empty() {
            return Err(QuantumError::Spec("at least one PQC layer is required".into()));
        }
        if let Some(&q) = disregard.iter().find(|&&q| q >= n_qubits) {
            return Err(QuantumError::Spec(format!(
                "disregarded qubit {q} outside register of {n_qubits}"
            )));
        }
        if disregard.len() >= n_qubits {
            return Err(QuantumError::Spec("at least one qubit must be measured".into()));
        }
        Ok(Self {
            n_qubits,
            rotation_axes,
            embedding,
            entangler: Entangler::ClosedRing,
            disregard,
            trainable,
        })
    }

    /// Convenience constructor: `depth` layers all rotating about `axis`.
    pub fn uniform(
        n_qubits: usize,
        depth: usize,
        axis: Axis,
        embedding: Embedding,
        disregard: BTreeSet<usize>,
        trainable: bool,
    ) -> Result<Self, QuantumError> {
        Self::new(n_qubits, vec![axis; depth], embedding, disregard, trainable)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_pqc_layers(&self) -> usize {
        self.rotation_axes.len()
    }

    pub fn rotation_axes(&self) -> &[Axis] {
        &self.rotation_axes
    }

    pub fn embedding(&self) -> Embedding {
        self.embedding
    }

    pub fn entangler(&self) -> Entangler {
        self.entangler
    }

    pub fn disregard(&self) -> &BTreeSet<usize> {
        &self.disregard
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub fn n_weights(&self) -> usize {
        self.n_pqc_layers() * self.n_qubits
    }

    /// Qubits read out, ascending.
    pub fn measured(&self) -> Vec<usize> {
        (0..self.n_qubits)
            .filter(|q| !self.disregard.contains(q))
            .collect()
    }

    pub fn n_outputs(&self) -> usize {
        self.n_qubits - self.disregard.len()
    }

    /// Largest feature vector the embedding accepts.
    pub fn max_input_width(&self) -> usize {
        match self.embedding {
            Embedding::Angle(_) => self.n_qubits,
            Embedding::Amplitude => 1 << self.n_qubits,
        }
    }
}

/// Rotation angles of a PQC, `[n_pqc_layers × n_qubits]` stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumWeights {
    n_layers: usize,
    n_qubits: usize,
    values: Vec<f64>,
}

impl QuantumWeights {
    pub fn zeros(n_layers: usize, n_qubits: usize) -> Self {
        Self {
            n_layers,
            n_qubits,
            values: vec![0.0; n_layers * n_qubits],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, QuantumError> {
        let n_layers = rows.len();
        let n_qubits = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_qubits) {
            return Err(QuantumError::Shape("ragged weight rows".into()));
        }
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(QuantumError::NonFinite("quantum weight"));
        }
        Ok(Self {
            n_layers,
            n_qubits,
            values,
        })
    }

    pub fn for_spec(spec: &QuantumLayerSpec, values: Vec<f64>) -> Result<Self, QuantumError> {
        if values.len() != spec.n_weights() {
            return Err(QuantumError::Shape(format!(
                "expected {} weights, got {}",
                spec.n_weights(),
                values.len()
            )));
        }
        Ok(Self {
            n_layers: spec.n_pqc_layers(),
            n_qubits: spec.n_qubits(),
            values,
        })
    }

    pub fn get(&self, layer: usize, qubit: usize) -> f64 {
        self.values[layer * self.n_qubits + qubit]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_layers, self.n_qubits)
    }

    fn check(&self, spec: &QuantumLayerSpec) -> Result<(), QuantumError> {
        if self.shape() != (spec.n_pqc_layers(), spec.n_qubits()) {
            return Err(QuantumError::Shape(format!(
                "weights {:?} do not match spec ({}, {})",
                self.shape(),
                spec.n_pqc_layers(),
                spec.n_qubits()
            )));
        }
        Ok(())
    }
}

/// Rotates qubit `i` by `features[i]`, starting from `|0…0⟩`.
pub fn angle_embed(
    features: &[f64],
    axis: Axis,
    n_qubits: usize,
) -> Result<Statevector, QuantumError> {
    if features.len() > n_qubits {
        return Err(QuantumError::Width {
            got: features.len(),
            capacity: n_qubits,
        });
    }
    let mut state = Statevector::new(n_qubits)?;
    for (q, &x) in features.iter().enumerate() {
        state.apply_rotation(q, axis, x)?;
    }
    Ok(state)
}

/// Zero-pads `features` to `2^n_qubits` and L2-normalizes them into the amplitudes.
pub fn amplitude_embed(features: &[f64], n_qubits: usize) -> Result<Statevector, QuantumError> {
    let mut state = Statevector::new(n_qubits)?;
    let capacity = state.amplitudes().len();
    if features.is_empty() || features.len() > capacity {
        return Err(QuantumError::Width {
            got: features.len(),
            capacity,
        });
    }
    if features.iter().any(|x| !x.is_finite()) {
        return Err(QuantumError::NonFinite("amplitude feature"));
    }
    let norm = features.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(QuantumError::ZeroNorm);
    }
    let amps = state.amplitudes_mut();
    amps[0] = Complex64::new(0.0, 0.0);
    for (a, &x) in amps.iter_mut().zip(features) {
        *a = Complex64::new(x / norm, 0.0);
    }
    Ok(state)
}

fn embed(features: &[f64], spec: &QuantumLayerSpec) -> Result<Statevector, QuantumError> {
    match spec.embedding {
        Embedding::Angle(axis) => angle_embed(features, axis, spec.n_qubits),
        Embedding::Amplitude => amplitude_embed(features, spec.n_qubits),
    }
}

fn apply_ring(state: &mut Statevector) -> Result<(), QuantumError> {
    let n = state.n_qubits();
    if n < 2 {
        return Ok(());
    }
    for i in 0..n {
        state.apply_cnot(i, (i + 1) % n)?;
    }
    Ok(())
}

fn apply_ring_inverse(state: &mut Statevector) -> Result<(), QuantumError> {
    let n = state.n_qubits();
    if n < 2 {
        return Ok(());
    }
    for i in (0..n).rev() {
        state.apply_cnot(i, (i + 1) % n)?;
    }
    Ok(())
}

/// Applies every PQC layer: one rotation per qubit, then the CNOT ring.
pub fn pqc_layer(
    state: &mut Statevector,
    spec: &QuantumLayerSpec,
    weights: &QuantumWeights,
) -> Result<(), QuantumError> {
    weights.check(spec)?;
    if state.n_qubits() != spec.n_qubits {
        return Err(QuantumError::Shape(format!(
            "state has {} qubits, spec {}",
            state.n_qubits(),
            spec.n_qubits
        )));
    }
    for (layer, &axis) in spec.rotation_axes.iter().enumerate() {
        for q in 0..spec.n_qubits {
            state.apply_rotation(q, axis, weights.get(layer, q))?;
        }
        apply_ring(state)?;
    }
    Ok(())
}

/// Inverse of [`pqc_layer`].
fn pqc_adjoint(
    state: &mut Statevector,
    spec: &QuantumLayerSpec,
    weights: &QuantumWeights,
) -> Result<(), QuantumError> {
    for (layer, &axis) in spec.rotation_axes.iter().enumerate().rev() {
        apply_ring_inverse(state)?;
        for q in (0..spec.n_qubits).rev() {
            state.apply_rotation(q, axis, -weights.get(layer, q))?;
        }
    }
    Ok(())
}

fn prepared_state(
    features: &[f64],
    spec: &QuantumLayerSpec,
    weights: &QuantumWeights,
) -> Result<Statevector, QuantumError> {
    let mut state = embed(features, spec)?;
    pqc_layer(&mut state, spec, weights)?;
    Ok(state)
}

fn measure(state: &Statevector, spec: &QuantumLayerSpec) -> Result<Vec<f64>, QuantumError> {
    spec.measured()
        .into_iter()
        .map(|q| state.expval_z(q))
        .collect()
}

/// Embed, run the PQC, and read `⟨Z⟩` on every measured qubit in ascending order.
pub fn run_circuit(
    features: &[f64],
    spec: &QuantumLayerSpec,
    weights: &QuantumWeights,
) -> Result<Vec<f64>, QuantumError> {
    let state = prepared_state(features, spec, weights)?;
    measure(&state, spec)
}

/// `∂⟨Z_q⟩/∂weights[weight_index]` for each measured qubit, by the two-term
/// shift rule `[f(θ+π/2) − f(θ−π/2)] / 2`.
pub fn parameter_shift_grad(
    features: &[f64],
    spec: &QuantumLayerSpec,
    weights: &QuantumWeights,
    weight_index: usize,
) -> Result<Vec<f64>, QuantumError> {
    if !spec.trainable {
        return Err(QuantumError::NotTrainable);
    }
    weights.check(spec)?;
    if weight_index >= weights.values.len() {
        return Err(QuantumError::WeightIndex {
            index: weight_index,
            len: weights.values.len(),
        });
    }
    weight_shift(features, spec, weights, weight_index)
}

fn weight_shift(
    features: &[f64],
    spec: &QuantumLayerSpec,
    weights: &QuantumWeights,
    index: usize,
) -> Result<Vec<f64>, QuantumError> {
    let mut shifted = weights.clone();
    shifted.values[index] += FRAC_PI_2;
    let plus = run_circuit(features, spec, &shifted)?;
    shifted.values[index] = weights.values[index] - FRAC_PI_2;
    let minus = run_circuit(features, spec, &shifted)?;
    Ok(plus
        .iter()
        .zip(&minus)
        .map(|(p, m)| (p - m) / 2.0)
        .collect())
}

/// Outputs and Jacobians of one circuit evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitJacobian {
    pub outputs: Vec<f64>,
    /// `weights[j][k] = ∂outputs[k]/∂weight_j`; empty for a non-trainable spec.
    pub weights: Vec<Vec<f64>>,
    /// `inputs[i][k] = ∂outputs[k]/∂features[i]`.
    pub inputs: Vec<Vec<f64>>,
}

impl CircuitJacobian {
    /// Contracts an upstream gradient over the outputs: returns
    /// `(∂L/∂weights, ∂L/∂features)`.
    pub fn pullback(&self, upstream: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let dot = |col: &Vec<f64>| col.iter().zip(upstream).map(|(a, b)| a * b).sum::<f64>();
        (
            self.weights.iter().map(dot).collect(),
            self.inputs.iter().map(dot).collect(),
        )
    }
}

/// Full Jacobian of [`run_circuit`]. Weight derivatives (trainable specs only)
/// and angle-embedded inputs use the shift rule; amplitude-embedded inputs use
/// the normalization Jacobian with one adjoint pass per measured qubit.
pub fn circuit_jacobian(
    features: &[f64],
    spec: &QuantumLayerSpec,
    weights: &QuantumWeights,
) -> Result<CircuitJacobian, QuantumError> {
    let state = prepared_state(features, spec, weights)?;
    let outputs = measure(&state, spec)?;

    let weight_jac = if spec.trainable {
        (0..weights.values.len())
            .map(|j| weight_shift(features, spec, weights, j))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };

    let input_jac = match spec.embedding {
        Embedding::Angle(_) => {
            let mut shifted = features.to_vec();
            let mut cols = Vec::with_capacity(features.len());
            for i in 0..features.len() {
                shifted[i] = features[i] + FRAC_PI_2;
                let plus = run_circuit(&shifted, spec, weights)?;
                shifted[i] = features[i] - FRAC_PI_2;
                let minus = run_circuit(&shifted, spec, weights)?;
                shifted[i] = features[i];
                cols.push(plus.iter().zip(&minus).map(|(p, m)| (p - m) / 2.0).collect());
            }
            cols
        }
        Embedding::Amplitude => amplitude_input_jacobian(features, spec, weights, &state, &outputs)?,
    };

    Ok(CircuitJacobian {
        outputs,
        weights: weight_jac,
        inputs: input_jac,
    })
}

fn amplitude_input_jacobian(
    features: &[f64],
    spec: &QuantumLayerSpec,
    weights: &QuantumWeights,
    evolved: &Statevector,
    outputs: &[f64],
) -> Result<Vec<Vec<f64>>, QuantumError> {
    let norm = features.iter().map(|x| x * x).sum::<f64>().sqrt();
    let psi: Vec<f64> = features.iter().map(|x| x / norm).collect();
    let mut cols = vec![vec![0.0; outputs.len()]; features.len()];
    for (k, q) in spec.measured().into_iter().enumerate() {
        // g = 2 Re(U† Z_q U ψ); ∂out/∂x = (g − ψ (g·ψ)) / ‖x‖ with g·ψ = 2·out
        let mask = 1usize << q;
        let mut lambda = evolved.clone();
        for (b, a) in lambda.amplitudes_mut().iter_mut().enumerate() {
            if b & mask != 0 {
                *a = -*a;
            }
        }
        pqc_adjoint(&mut lambda, spec, weights)?;
        let g_dot_psi = 2.0 * outputs[k];
        for (m, col) in cols.iter_mut().enumerate() {
            let g = 2.0 * lambda.amplitudes()[m].re;
            col[k] = (g - psi[m] * g_dot_psi) / norm;
        }
    }
    Ok(cols)
}
