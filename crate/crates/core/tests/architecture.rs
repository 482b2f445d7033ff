//! Structural contracts of the six architectures.

mod common;

use std::collections::BTreeSet;

use qcnn_core::models::{
    build_model, build_model_with, checkpoint, quanvolution_preprocess, train_model, Layer,
    ModelConfig, TrainConfig, TrainData, Variant,
};
use qcnn_core::nn::Tensor;
use qcnn_core::quantum::{Axis, Embedding, QuantumLayerSpec, QuantumWeights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn random_batch(b: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::new(vec![b, 28], (0..b * 28).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn quantum_index(layers: &[Layer]) -> usize {
    layers
        .iter()
        .position(|l| matches!(l, Layer::Quantum(_) | Layer::ParallelQuantum(_)))
        .expect("model has a trainable quantum stage")
}

#[test]
fn mlayer_uses_four_groups_of_four() {
    let m = build_model(Variant::QcnnMlayer, 1).unwrap();
    assert_eq!(m.total_qubits(), 16);
    let Layer::ParallelQuantum(groups) = &m.layers()[quantum_index(m.layers())] else {
        panic!("expected parallel quantum stage");
    };
    assert_eq!(groups.len(), 4);
    assert!(groups.iter().all(|g| g.spec.n_qubits() == 4 && g.spec.n_outputs() == 4));
}

#[test]
fn quanconv_disregards_two_of_six() {
    for seed in 0..5 {
        let m = build_model(Variant::QuanConvCnn, seed).unwrap();
        let i = quantum_index(m.layers());
        let Layer::Quantum(q) = &m.layers()[i] else { panic!() };
        assert_eq!(q.spec.n_qubits(), 6);
        assert_eq!(q.spec.disregard().len(), 2);
        let x = random_batch(3, seed).reshape(vec![3, 1, 28]).unwrap();
        let out = m.forward_range(0, i + 1, &x).unwrap();
        assert_eq!(out.shape(), &[3, 4]);
        assert_eq!(m.disregard_set().unwrap().len(), 2);
    }
}

#[test]
fn quanvolution_halves_length_into_two_channels() {
    let spec = QuantumLayerSpec::uniform(2, 2, Axis::Y, Embedding::Angle(Axis::Y), BTreeSet::new(), false).unwrap();
    let x = random_batch(5, 3).reshape(vec![5, 1, 28]).unwrap();
    let w = QuantumWeights::zeros(2, 2);
    let y = quanvolution_preprocess(&x, &spec, &w).unwrap();
    assert_eq!(y.shape(), &[5, 2, 14]);

    let zeros = Tensor::zeros(vec![1, 1, 28]);
    let y = quanvolution_preprocess(&zeros, &spec, &w).unwrap();
    assert!(y.data().iter().all(|&v| (v - 1.0).abs() < 1e-12));

    let odd = Tensor::zeros(vec![1, 1, 27]);
    assert!(quanvolution_preprocess(&odd, &spec, &w).is_err());
}

#[test]
fn outputs_are_probabilities_and_deterministic() {
    let x = random_batch(6, 9);
    for v in Variant::ALL {
        let m = build_model(v, 21).unwrap();
        let a = m.forward(&x).unwrap();
        assert_eq!(a.shape(), &[6, 1], "{v}");
        assert!(a.data().iter().all(|&p| p > 0.0 && p < 1.0), "{v}");
        assert_eq!(a, m.forward(&x).unwrap());
        assert_eq!(a, build_model(v, 21).unwrap().forward(&x).unwrap());
    }
}

#[test]
fn quantum_stage_outputs_bounded() {
    let x = random_batch(8, 4).reshape(vec![8, 1, 28]).unwrap();
    for v in Variant::ALL.into_iter().filter(|&v| v != Variant::Cnn && v != Variant::QuanvolutionNn) {
        for seed in 0..3 {
            let m = build_model(v, seed).unwrap();
            let out = m.forward_range(0, quantum_index(m.layers()) + 1, &x).unwrap();
            assert!(out.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }
}

#[test]
fn parameter_count_independent_of_seed() {
    for v in Variant::ALL {
        let n = build_model(v, 0).unwrap().n_params();
        for seed in [1, 77, u64::MAX] {
            assert_eq!(build_model(v, seed).unwrap().n_params(), n, "{v}");
        }
    }
}

#[test]
fn mlayer_has_no_cross_sample_mixing() {
    let m = build_model(Variant::QcnnMlayer, 5).unwrap();
    let x = random_batch(6, 12);
    let perm = [3, 0, 5, 1, 4, 2];
    let out = m.forward(&x).unwrap();
    let out_perm = m.forward(&x.select(&perm)).unwrap();
    for (i, &p) in perm.iter().enumerate() {
        assert_eq!(out_perm.data()[i], out.data()[p]);
    }
}

fn hash(t: &Tensor) -> String {
    let mut h = Sha256::new();
    for v in t.data() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[test]
fn quanvolution_features_unchanged_by_training() {
    let data = common::separable_samples(64, 0.05, 8);
    let mut m = build_model_with(Variant::QuanvolutionNn, 2, &ModelConfig::reduced()).unwrap();
    assert_eq!(m.frozen_prefix(), 1);
    let before = hash(&m.frozen_features(&data.inputs).unwrap());
    let params_before = m.param_blocks().concat();
    let cfg = TrainConfig { epochs: 2, restart: None, ..TrainConfig::default() };
    let td = TrainData { train: data.clone(), test: data.clone(), validation: None };
    train_model(&mut m, &td, &cfg).unwrap();
    assert_ne!(m.param_blocks().concat(), params_before, "training must move classical weights");
    assert_eq!(hash(&m.frozen_features(&data.inputs).unwrap()), before);
}

#[test]
fn trained_checkpoint_round_trips() {
    let data = common::separable_samples(32, 0.05, 3);
    let td = TrainData { train: data.clone(), test: data.clone(), validation: None };
    let cfg = TrainConfig { epochs: 1, restart: None, ..TrainConfig::default() };
    let dir = tempfile::tempdir().unwrap();
    for v in Variant::ALL {
        let mut m = build_model_with(v, 4, &ModelConfig::reduced()).unwrap();
        train_model(&mut m, &td, &cfg).unwrap();
        let path = dir.path().join(format!("{}.json", v.slug()));
        checkpoint::save(&m, &path).unwrap();
        let back = checkpoint::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.forward(&data.inputs).unwrap(), m.forward(&data.inputs).unwrap());
    }
}
