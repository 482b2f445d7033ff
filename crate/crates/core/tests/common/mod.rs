//! Helpers shared by the integration tests: independent oracles and data.
#![allow(dead_code)]

use num_complex::Complex64;
use qcnn_core::models::{ModelGraph, Samples};
use qcnn_core::nn::Tensor;
use qcnn_core::quantum::{rotation_matrix, Axis, Embedding, QuantumLayerSpec, QuantumWeights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Matrix = Vec<Vec<Complex64>>;

pub fn identity(dim: usize) -> Matrix {
    (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
                .collect()
        })
        .collect()
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn apply(m: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Full 2^n × 2^n matrix of a single-qubit gate on `qubit` (qubit 0 = least significant bit),
/// built by Kronecker products.
pub fn single_qubit_unitary(n: usize, qubit: usize, gate: [[Complex64; 2]; 2]) -> Matrix {
    let g: Matrix = gate.iter().map(|r| r.to_vec()).collect();
    let mut m = vec![vec![Complex64::new(1.0, 0.0)]];
    // most significant qubit first
    for q in (0..n).rev() {
        let factor = if q == qubit { g.clone() } else { identity(2) };
        m = kron(&m, &factor);
    }
    m
}

fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![Complex64::new(0.0, 0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

/// CNOT as a permutation matrix over basis states.
#[allow(clippy::needless_range_loop)]
pub fn cnot_unitary(n: usize, control: usize, target: usize) -> Matrix {
    let dim = 1 << n;
    let mut m = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
    for s in 0..dim {
        let out = if s >> control & 1 == 1 { s ^ (1 << target) } else { s };
        m[out][s] = Complex64::new(1.0, 0.0);
    }
    m
}

/// Final state of embedding + PQC, applying one full 2^n × 2^n matrix per gate
/// (Kronecker-built rotations, permutation-matrix CNOTs) to the start vector:
/// `U_k ⋯ U_1 |ψ₀⟩`, evaluated right to left.
pub fn oracle_state(spec: &QuantumLayerSpec, weights: &QuantumWeights, features: &[f64]) -> Vec<Complex64> {
    let n = spec.n_qubits();
    let dim = 1 << n;
    let mut gates: Vec<Matrix> = Vec::new();
    let mut state = vec![Complex64::new(0.0, 0.0); dim];
    match spec.embedding() {
        Embedding::Angle(axis) => {
            state[0] = Complex64::new(1.0, 0.0);
            for (q, &x) in features.iter().enumerate() {
                gates.push(single_qubit_unitary(n, q, rotation_matrix(axis, x)));
            }
        }
        Embedding::Amplitude => {
            let norm = features.iter().map(|x| x * x).sum::<f64>().sqrt();
            for (i, &x) in features.iter().enumerate() {
                state[i] = Complex64::new(x / norm, 0.0);
            }
        }
    }
    for layer in 0..spec.n_pqc_layers() {
        let axis = spec.rotation_axes()[layer];
        for q in 0..n {
            gates.push(single_qubit_unitary(n, q, rotation_matrix(axis, weights.get(layer, q))));
        }
        if n > 1 {
            for q in 0..n {
                gates.push(cnot_unitary(n, q, (q + 1) % n));
            }
        }
    }
    for g in &gates {
        state = apply(g, &state);
    }
    state
}

/// The same circuit as one explicit unitary `U = U_k ⋯ U_1` (small registers only).
pub fn oracle_unitary(spec: &QuantumLayerSpec, weights: &QuantumWeights) -> Matrix {
    let n = spec.n_qubits();
    let mut u = identity(1 << n);
    for layer in 0..spec.n_pqc_layers() {
        let axis = spec.rotation_axes()[layer];
        for q in 0..n {
            u = matmul(&single_qubit_unitary(n, q, rotation_matrix(axis, weights.get(layer, q))), &u);
        }
        if n > 1 {
            for q in 0..n {
                u = matmul(&cnot_unitary(n, q, (q + 1) % n), &u);
            }
        }
    }
    u
}

/// ⟨Z_q⟩ from amplitudes by direct summation.
pub fn oracle_expval(state: &[Complex64], qubit: usize) -> f64 {
    state
        .iter()
        .enumerate()
        .map(|(s, a)| if s >> qubit & 1 == 1 { -a.norm_sqr() } else { a.norm_sqr() })
        .sum()
}

pub fn random_axis(rng: &mut ChaCha8Rng) -> Axis {
    [Axis::X, Axis::Y, Axis::Z][rng.random_range(0..3)]
}

/// Central finite difference of the mean BCE loss for every parameter of `model`.
pub fn fd_gradient(model: &ModelGraph, batch: &Tensor, labels: &[f64], h: f64) -> Vec<f64> {
    let mut probe = model.clone();
    let n_blocks = probe.param_blocks().len();
    let mut out = Vec::new();
    for b in 0..n_blocks {
        let len = probe.param_blocks()[b].len();
        for i in 0..len {
            let orig = probe.param_blocks()[b][i];
            probe.param_blocks_mut()[b][i] = orig + h;
            let up = probe.loss(batch, labels).unwrap();
            probe.param_blocks_mut()[b][i] = orig - h;
            let down = probe.loss(batch, labels).unwrap();
            probe.param_blocks_mut()[b][i] = orig;
            out.push((up - down) / (2.0 * h));
        }
    }
    out
}

/// Ground-truth rule of the separable synthetic task.
pub fn threshold_rule(x: &[f64]) -> f64 {
    if (x[0] + x[7]) / 2.0 > 0.5 {
        1.0
    } else {
        0.0
    }
}

/// `n` uniform points in [0,1]^28 labeled by [`threshold_rule`], keeping a
/// margin of `margin` around the decision boundary.
pub fn separable_samples(n: usize, margin: f64, seed: u64) -> Samples {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    while rows.len() < n {
        let x: Vec<f64> = (0..28).map(|_| rng.random::<f64>()).collect();
        if ((x[0] + x[7]) / 2.0 - 0.5).abs() >= margin {
            rows.push(x);
        }
    }
    let labels = rows.iter().map(|x| threshold_rule(x)).collect();
    Samples::from_rows(&rows, labels).unwrap()
}

/// Max over entries of |a − b| / max(|a|, |b|, floor).
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// A random circuit: ≤ `max_qubits` qubits, ≤ `max_layers` PQC layers with random
/// axes, weights and disregard set, plus matching embedded features.
pub fn random_circuit(
    rng: &mut ChaCha8Rng,
    max_qubits: usize,
    max_layers: usize,
) -> (QuantumLayerSpec, QuantumWeights, Vec<f64>) {
    use std::collections::BTreeSet;
    use std::f64::consts::PI;

    let n = rng.random_range(1..=max_qubits);
    let depth = rng.random_range(1..=max_layers);
    let axes = (0..depth).map(|_| random_axis(rng)).collect();
    let amplitude = rng.random_bool(0.4);
    let embedding = if amplitude {
        Embedding::Amplitude
    } else {
        Embedding::Angle(random_axis(rng))
    };
    let mut disregard = BTreeSet::new();
    for q in 0..n {
        if disregard.len() + 1 < n && rng.random_bool(0.25) {
            disregard.insert(q);
        }
    }
    let spec = QuantumLayerSpec::new(n, axes, embedding, disregard, true).unwrap();
    let values = (0..spec.n_weights()).map(|_| rng.random_range(-PI..PI)).collect();
    let weights = QuantumWeights::for_spec(&spec, values).unwrap();
    let width = if amplitude {
        rng.random_range(1..=(1usize << n))
    } else {
        rng.random_range(1..=n)
    };
    let mut features: Vec<f64> = (0..width).map(|_| rng.random_range(-PI..PI)).collect();
    if amplitude && features.iter().all(|&x| x == 0.0) {
        features[0] = 1.0;
    }
    (spec, weights, features)
}

/// Hand-enumerated trade-off cases: `(train, test, expected epoch)`.
pub const TRADEOFF_CASES: [(&[f64], &[f64], usize); 10] = [
    // crossing between epochs 0 and 1
    (&[0.90, 0.92], &[0.95, 0.91], 1),
    // identical curves: earliest tie
    (&[0.5, 0.6, 0.7], &[0.5, 0.6, 0.7], 0),
    // parallel curves, no crossing: earliest tie
    (&[0.75, 0.5, 0.75], &[0.5, 0.25, 0.5], 0),
    // gap shrinks without closing
    (&[0.6, 0.7, 0.8, 0.85], &[0.9, 0.88, 0.86, 0.855], 3),
    // test starts all-malicious then drops below train immediately
    (&[0.4, 0.9, 0.95], &[1.0, 0.5, 0.6], 1),
    // two crossings: the first wins over a smaller later gap
    (&[0.5, 0.7, 0.6, 0.9], &[0.6, 0.65, 0.7, 0.8], 1),
    // exact touch at epoch 1
    (&[0.9, 0.8, 0.7], &[0.7, 0.8, 0.9], 1),
    // test starts at 0 (all benign) and overtakes at epoch 2
    (&[0.55, 0.8, 0.9, 0.95], &[0.0, 0.3, 0.92, 0.9], 2),
    // no crossing, minimum in the middle
    (&[0.9, 0.95, 0.97], &[0.5, 0.9, 0.6], 1),
    // late crossing after a long gap
    (&[0.6, 0.62, 0.64, 0.66, 0.9], &[0.99, 0.98, 0.97, 0.96, 0.5], 4),
];

/// Exhaustive oracle: scans every consecutive pair for a sign change of
/// `train − test` (including arriving at an exact tie), else scans every epoch
/// for the smallest absolute gap.
pub fn tradeoff_oracle(train: &[f64], test: &[f64]) -> usize {
    let sign = |e: usize| {
        let d = train[e] - test[e];
        if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        }
    };
    for e in 1..train.len() {
        let (a, b) = (sign(e - 1), sign(e));
        if a != 0 && a != b {
            return e;
        }
    }
    let gaps: Vec<f64> = train.iter().zip(test).map(|(a, b)| (a - b).abs()).collect();
    let min = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    gaps.iter().position(|&g| g == min).unwrap()
}
