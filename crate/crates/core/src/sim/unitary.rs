//! Dense circuit unitaries built from explicit Kronecker products.
//!
//! This is a reference path for testing the strided statevector kernels and
//! shares none of their indexing logic.

use num_complex::Complex64;

use super::{resolve, Circuit, Gate};
use crate::error::{Error, Result};

pub const MAX_UNITARY_QUBITS: usize = 5;

/// Row-major square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        Self { dim, data }
    }

    fn from_real(dim: usize, vals: &[f64]) -> Self {
        Self {
            dim,
            data: vals.iter().map(|v| Complex64::new(*v, 0.0)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn kron(&self, other: &DenseMatrix) -> DenseMatrix {
        let d = self.dim * other.dim;
        let mut data = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..self.dim {
            for j in 0..self.dim {
                let a = self.get(i, j);
                for k in 0..other.dim {
                    for l in 0..other.dim {
                        data[(i * other.dim + k) * d + j * other.dim + l] = a * other.get(k, l);
                    }
                }
            }
        }
        DenseMatrix { dim: d, data }
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        let d = self.dim;
        let mut data = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.get(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..d {
                    data[i * d + j] += a * other.get(k, j);
                }
            }
        }
        DenseMatrix { dim: d, data }
    }

    fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        DenseMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn adjoint(&self) -> DenseMatrix {
        let d = self.dim;
        let mut data = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                data[j * d + i] = self.get(i, j).conj();
            }
        }
        DenseMatrix { dim: d, data }
    }

    /// Column `col` as a vector.
    pub fn column(&self, col: usize) -> Vec<Complex64> {
        (0..self.dim).map(|r| self.get(r, col)).collect()
    }

    /// Largest elementwise deviation from another matrix.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

fn ry_matrix(theta: f64) -> DenseMatrix {
    let (s, c) = (0.5 * theta).sin_cos();
    DenseMatrix::from_real(2, &[c, -s, s, c])
}

/// Embeds one-qubit operators into the full register. `ops[q]` acts on qubit
/// `q`; qubit 0 is the least significant, i.e. the rightmost Kronecker factor.
fn embed(n_qubits: usize, ops: &[(usize, DenseMatrix)]) -> DenseMatrix {
    let mut full = DenseMatrix::identity(1);
    for q in (0..n_qubits).rev() {
        let factor = ops
            .iter()
            .find(|(k, _)| *k == q)
            .map(|(_, m)| m.clone())
            .unwrap_or_else(|| DenseMatrix::identity(2));
        full = full.kron(&factor);
    }
    full
}

fn gate_matrix(n_qubits: usize, gate: &Gate, features: &[f64], weights: &[f64]) -> DenseMatrix {
    match *gate {
        Gate::Ry { qubit, angle } => embed(
            n_qubits,
            &[(qubit, ry_matrix(resolve(angle, features, weights)))],
        ),
        Gate::Cnot { control, target } => {
            let p0 = DenseMatrix::from_real(2, &[1.0, 0.0, 0.0, 0.0]);
            let p1 = DenseMatrix::from_real(2, &[0.0, 0.0, 0.0, 1.0]);
            let x = DenseMatrix::from_real(2, &[0.0, 1.0, 1.0, 0.0]);
            embed(n_qubits, &[(control, p0)]).add(&embed(n_qubits, &[(control, p1), (target, x)]))
        }
    }
}

/// The `2^n × 2^n` unitary of `circuit` under the given bindings.
pub fn circuit_unitary(
    circuit: &Circuit,
    features: &[f64],
    weights: &[f64],
) -> Result<DenseMatrix> {
    let n = circuit.n_qubits();
    if n > MAX_UNITARY_QUBITS {
        return Err(Error::UnitaryTooLarge {
            n_qubits: n,
            max: MAX_UNITARY_QUBITS,
        });
    }
    circuit.check_bindings(features, weights)?;
    let mut u = DenseMatrix::identity(1 << n);
    for g in circuit.ops() {
        u = gate_matrix(n, g, features, weights).matmul(&u);
    }
    Ok(u)
}
