//! Dense statevector simulation restricted to `RY` rotations and `CNOT`.
//!
//! Qubit `i` is bit `i` of the amplitude index (little-endian), so
//! `|q1 q0⟩ = |10⟩` is amplitude index 2. The `RY` convention is
//!
//! ```text
//! RY(θ) = [[cos θ/2, -sin θ/2],
//!          [sin θ/2,  cos θ/2]]
//! ```

mod gradient;
mod unitary;

pub use gradient::{
    adjoint_jacobian, expectation_vjp, expectation_vjp_from_state, parameter_shift_jacobian,
    Jacobian, SlotGradient,
};
pub use unitary::{circuit_unitary, DenseMatrix, MAX_UNITARY_QUBITS};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 12;

/// Amplitudes of an `n`-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// The all-zeros basis state `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(Error::QubitCount(n_qubits));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Builds a state from raw amplitudes. The length must be a power of two;
    /// normalisation is the caller's responsibility.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(Error::Dimension {
                context: "statevector length",
                expected: len.next_power_of_two().max(2),
                actual: len,
            });
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// The computational basis state with the given index.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let mut s = Self::zero(n_qubits)?;
        if index >= s.amplitudes.len() {
            return Err(Error::Dimension {
                context: "basis index",
                expected: s.amplitudes.len(),
                actual: index,
            });
        }
        s.amplitudes[0] = Complex64::new(0.0, 0.0);
        s.amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    /// Applies `RY(theta)` to `qubit`.
    pub fn apply_ry(&mut self, qubit: usize, theta: f64) -> Result<()> {
        self.check_qubit(qubit)?;
        self.ry_unchecked(qubit, theta);
        Ok(())
    }

    /// Applies `CNOT` with the given control and target.
    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::SameControlTarget(control));
        }
        self.cnot_unchecked(control, target);
        Ok(())
    }

    pub(crate) fn ry_unchecked(&mut self, qubit: usize, theta: f64) {
        let (s, c) = (0.5 * theta).sin_cos();
        let stride = 1usize << qubit;
        for block in self.amplitudes.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x0, x1) = (*a0, *a1);
                *a0 = x0 * c - x1 * s;
                *a1 = x0 * s + x1 * c;
            }
        }
    }

    pub(crate) fn cnot_unchecked(&mut self, control: usize, target: usize) {
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        for i in 0..self.amplitudes.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amplitudes.swap(i, i | tmask);
            }
        }
    }

    /// `⟨Z⟩` on one qubit.
    pub fn expect_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let mask = 1usize << qubit;
        Ok(self
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
            .sum())
    }

    /// `⟨Z⟩` on every qubit, in qubit order.
    pub fn expect_z_all(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_qubits];
        for (b, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, o) in out.iter_mut().enumerate() {
                if b >> q & 1 == 0 {
                    *o += p;
                } else {
                    *o -= p;
                }
            }
        }
        out
    }

    /// Global parity `⟨Z⊗Z⊗…⊗Z⟩`.
    pub fn expect_z_product(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(b, a)| {
                if b.count_ones() % 2 == 0 {
                    a.norm_sqr()
                } else {
                    -a.norm_sqr()
                }
            })
            .sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Where a rotation angle comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Angle {
    /// Bound to an input feature.
    Feature(usize),
    /// Bound to a trainable weight.
    Weight(usize),
    Const(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    Ry { qubit: usize, angle: Angle },
    Cnot { control: usize, target: usize },
}

/// An ordered gate list with symbolic rotation angles.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<Gate>,
    n_features: usize,
    n_weights: usize,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&n_qubits) {
            return Err(Error::QubitCount(n_qubits));
        }
        Ok(Self {
            n_qubits,
            ops: Vec::new(),
            n_features: 0,
            n_weights: 0,
        })
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    pub fn ry(&mut self, qubit: usize, angle: Angle) -> Result<&mut Self> {
        self.check_qubit(qubit)?;
        match angle {
            Angle::Feature(i) => {
                if i >= self.n_qubits {
                    return Err(Error::Dimension {
                        context: "feature slot index",
                        expected: self.n_qubits,
                        actual: i,
                    });
                }
                self.n_features = self.n_features.max(i + 1);
            }
            Angle::Weight(i) => self.n_weights = self.n_weights.max(i + 1),
            Angle::Const(_) => {}
        }
        self.ops.push(Gate::Ry { qubit, angle });
        Ok(self)
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> Result<&mut Self> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::SameControlTarget(control));
        }
        self.ops.push(Gate::Cnot { control, target });
        Ok(self)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[Gate] {
        &self.ops
    }

    /// Number of feature values the circuit reads (one past the largest index).
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Number of trainable weights the circuit reads (one past the largest index).
    pub fn n_weights(&self) -> usize {
        self.n_weights
    }

    pub fn count_ry(&self) -> usize {
        self.ops
            .iter()
            .filter(|g| matches!(g, Gate::Ry { .. }))
            .count()
    }

    pub fn count_cnot(&self) -> usize {
        self.ops.len() - self.count_ry()
    }

    pub(crate) fn check_bindings(&self, features: &[f64], weights: &[f64]) -> Result<()> {
        for (slot, g) in self.ops.iter().enumerate() {
            if let Gate::Ry { angle, .. } = g {
                match *angle {
                    Angle::Feature(i) if i >= features.len() => {
                        return Err(Error::UnboundSlot {
                            slot,
                            index: i,
                            available: features.len(),
                        })
                    }
                    Angle::Weight(i) if i >= weights.len() => {
                        return Err(Error::UnboundSlot {
                            slot,
                            index: i,
                            available: weights.len(),
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn resolve(angle: Angle, features: &[f64], weights: &[f64]) -> f64 {
    match angle {
        Angle::Feature(i) => features[i],
        Angle::Weight(i) => weights[i],
        Angle::Const(v) => v,
    }
}

/// Runs `circuit` on `|0…0⟩`. `shift` adds an offset to the angle of the
/// rotation at the given op index (used by the parameter-shift rule).
pub(crate) fn run_shifted(
    circuit: &Circuit,
    features: &[f64],
    weights: &[f64],
    shift: Option<(usize, f64)>,
) -> StateVector {
    let mut state = StateVector::zero(circuit.n_qubits).expect("validated at construction");
    for (idx, g) in circuit.ops.iter().enumerate() {
        match *g {
            Gate::Ry { qubit, angle } => {
                let mut theta = resolve(angle, features, weights);
                if let Some((at, delta)) = shift {
                    if at == idx {
                        theta += delta;
                    }
                }
                state.ry_unchecked(qubit, theta);
            }
            Gate::Cnot { control, target } => state.cnot_unchecked(control, target),
        }
    }
    state
}

/// Applies every gate of `circuit` to the zero state.
pub fn run_circuit(circuit: &Circuit, features: &[f64], weights: &[f64]) -> Result<StateVector> {
    circuit.check_bindings(features, weights)?;
    Ok(run_shifted(circuit, features, weights, None))
}
