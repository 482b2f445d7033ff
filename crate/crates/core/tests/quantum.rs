//! Simulator checks against a dense-matrix oracle, analytic gradients against
//! finite differences, and algebraic properties of the gates.

mod common;

use std::collections::BTreeSet;
use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use qcnn_core::quantum::{
    amplitude_embed, angle_embed, circuit_jacobian, parameter_shift_grad, pqc_layer, run_circuit,
    Axis, Embedding, QuantumLayerSpec, QuantumWeights, Statevector,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn simulate(spec: &QuantumLayerSpec, weights: &QuantumWeights, features: &[f64]) -> Statevector {
    let mut state = match spec.embedding() {
        Embedding::Angle(axis) => angle_embed(features, axis, spec.n_qubits()).unwrap(),
        Embedding::Amplitude => amplitude_embed(features, spec.n_qubits()).unwrap(),
    };
    pqc_layer(&mut state, spec, weights).unwrap();
    state
}

#[test]
fn gatewise_matches_dense_unitary_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..60 {
        let (spec, weights, features) = common::random_circuit(&mut rng, 6, 3);
        let got = simulate(&spec, &weights, &features);
        let want = common::oracle_state(&spec, &weights, &features);
        for (a, b) in got.amplitudes().iter().zip(&want) {
            assert!((a - b).norm() < 1e-10, "case {case}: {a} vs {b}");
        }
        let outs = run_circuit(&features, &spec, &weights).unwrap();
        let measured = spec.measured();
        assert_eq!(outs.len(), measured.len());
        for (o, q) in outs.iter().zip(measured) {
            assert!((o - common::oracle_expval(&want, q)).abs() < 1e-10);
        }
    }
}

#[test]
fn explicit_unitary_agrees_on_small_registers() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let (spec, weights, features) = common::random_circuit(&mut rng, 4, 3);
        let u = common::oracle_unitary(&spec, &weights);
        let start = match spec.embedding() {
            Embedding::Angle(axis) => angle_embed(&features, axis, spec.n_qubits()).unwrap(),
            Embedding::Amplitude => amplitude_embed(&features, spec.n_qubits()).unwrap(),
        };
        let want = common::apply(&u, start.amplitudes());
        let got = simulate(&spec, &weights, &features);
        for (a, b) in got.amplitudes().iter().zip(&want) {
            assert!((a - b).norm() < 1e-10);
        }
    }
}

#[test]
fn parameter_shift_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-4;
    for _ in 0..25 {
        let (spec, weights, features) = common::random_circuit(&mut rng, 5, 3);
        for j in 0..spec.n_weights() {
            let analytic = parameter_shift_grad(&features, &spec, &weights, j).unwrap();
            let mut w = weights.clone();
            w.values_mut()[j] += h;
            let up = run_circuit(&features, &spec, &w).unwrap();
            w.values_mut()[j] -= 2.0 * h;
            let down = run_circuit(&features, &spec, &w).unwrap();
            for k in 0..analytic.len() {
                let fd = (up[k] - down[k]) / (2.0 * h);
                assert!((analytic[k] - fd).abs() < 1e-5);
            }
        }
    }
}

#[test]
fn input_jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let h = 1e-6;
    for _ in 0..25 {
        let (spec, weights, features) = common::random_circuit(&mut rng, 4, 2);
        let jac = circuit_jacobian(&features, &spec, &weights).unwrap();
        for i in 0..features.len() {
            let mut f = features.clone();
            f[i] += h;
            let up = run_circuit(&f, &spec, &weights).unwrap();
            f[i] -= 2.0 * h;
            let down = run_circuit(&f, &spec, &weights).unwrap();
            for k in 0..up.len() {
                let fd = (up[k] - down[k]) / (2.0 * h);
                assert!((jac.inputs[i][k] - fd).abs() < 1e-6, "{:?}", spec.embedding());
            }
        }
    }
}

#[test]
fn single_qubit_cosine_law() {
    // RY(x)|0⟩ has ⟨Z⟩ = cos x
    let spec = QuantumLayerSpec::new(1, vec![Axis::Y], Embedding::Angle(Axis::Y), BTreeSet::new(), true).unwrap();
    let w = QuantumWeights::zeros(1, 1);
    for i in 0..100 {
        let x = -PI + 2.0 * PI * i as f64 / 99.0;
        let out = run_circuit(&[x], &spec, &w).unwrap();
        assert!((out[0] - x.cos()).abs() < 1e-12);
    }
}

fn axis_strategy() -> impl Strategy<Value = Axis> {
    prop_oneof![Just(Axis::X), Just(Axis::Y), Just(Axis::Z)]
}

fn random_state(n: usize, seed: u64) -> Statevector {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps: Vec<Complex64> = (0..1 << n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    Statevector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap()
}

proptest! {
    #[test]
    fn rotations_preserve_norm(n in 1usize..7, seed: u64, axis in axis_strategy(), theta in -10.0f64..10.0, q in 0usize..6) {
        let mut s = random_state(n, seed);
        s.apply_rotation(q % n, axis, theta).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cnot_is_an_involution(n in 2usize..7, seed: u64, c in 0usize..6, t in 0usize..6) {
        let (c, t) = (c % n, t % n);
        prop_assume!(c != t);
        let original = random_state(n, seed);
        let mut s = original.clone();
        s.apply_cnot(c, t).unwrap();
        s.apply_cnot(c, t).unwrap();
        for (a, b) in s.amplitudes().iter().zip(original.amplitudes()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn rotation_angles_add(n in 1usize..6, seed: u64, axis in axis_strategy(), a in -PI..PI, b in -PI..PI, q in 0usize..5) {
        let q = q % n;
        let mut two = random_state(n, seed);
        let mut one = two.clone();
        two.apply_rotation(q, axis, a).unwrap();
        two.apply_rotation(q, axis, b).unwrap();
        one.apply_rotation(q, axis, a + b).unwrap();
        for (x, y) in two.amplitudes().iter().zip(one.amplitudes()) {
            prop_assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn outputs_bounded(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (spec, weights, features) = common::random_circuit(&mut rng, 5, 3);
        for v in run_circuit(&features, &spec, &weights).unwrap() {
            prop_assert!((-1.0..=1.0).contains(&v));
        }
    }
}
