//! Dense statevector register and the gate set used by the detector circuits.
//!
//! Basis index bit `i` holds qubit `i`; qubit 0 is the least significant bit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::QuantumError;

/// Largest register the dense simulator will allocate.
pub const MAX_QUBITS: usize = 20;

/// Rotation axis on the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// Allocates `|0…0⟩` on `n_qubits` qubits.
    pub fn new(n_qubits: usize) -> Result<Self, QuantumError> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(QuantumError::Capacity {
                requested: n_qubits,
                max: MAX_QUBITS,
            });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Wraps raw amplitudes. The caller is responsible for normalization.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self, QuantumError> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QuantumError::Width {
                got: len,
                capacity: len.next_power_of_two(),
            });
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(QuantumError::Capacity {
                requested: n_qubits,
                max: MAX_QUBITS,
            });
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, qubit: usize) -> Result<(), QuantumError> {
        if qubit >= self.n_qubits {
            Err(QuantumError::QubitIndex {
                qubit,
                n_qubits: self.n_qubits,
            })
        } else {
            Ok(())
        }
    }

    /// Applies `R_axis(theta) = exp(-i·theta·P/2)` to `qubit`.
    pub fn apply_rotation(
        &mut self,
        qubit: usize,
        axis: Axis,
        theta: f64,
    ) -> Result<(), QuantumError> {
        self.check_qubit(qubit)?;
        if !theta.is_finite() {
            return Err(QuantumError::NonFinite("rotation angle"));
        }
        let m = rotation_matrix(axis, theta);
        self.apply_single(qubit, &m);
        Ok(())
    }

    fn apply_single(&mut self, qubit: usize, m: &[[Complex64; 2]; 2]) {
        let stride = 1usize << qubit;
        let len = self.amplitudes.len();
        let mut block = 0;
        while block < len {
            for i in block..block + stride {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i + stride];
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i + stride] = m[1][0] * a0 + m[1][1] * a1;
            }
            block += stride << 1;
        }
    }

    /// Flips `target` on every basis state whose `control` bit is set.
    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<(), QuantumError> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(QuantumError::ControlIsTarget(control));
        }
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        for i in 0..self.amplitudes.len() {
            // visit each swapped pair once, from its target-bit-clear member
            if i & cmask != 0 && i & tmask == 0 {
                self.amplitudes.swap(i, i | tmask);
            }
        }
        Ok(())
    }

    /// Pauli-Z expectation value of one qubit.
    pub fn expval_z(&self, qubit: usize) -> Result<f64, QuantumError> {
        self.check_qubit(qubit)?;
        let mask = 1usize << qubit;
        let value = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(b, a)| {
                if b & mask == 0 {
                    a.norm_sqr()
                } else {
                    -a.norm_sqr()
                }
            })
            .sum::<f64>();
        Ok(value.clamp(-1.0, 1.0))
    }
}

/// 2×2 matrix of `R_axis(theta)`, row-major.
pub fn rotation_matrix(axis: Axis, theta: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    let zero = Complex64::new(0.0, 0.0);
    match axis {
        Axis::X => [
            [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
            [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
        ],
        Axis::Y => [
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ],
        Axis::Z => [
            [Complex64::new(c, -s), zero],
            [zero, Complex64::new(c, s)],
        ],
    }
}
