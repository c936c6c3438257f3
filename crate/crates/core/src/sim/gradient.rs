//! Gradients of `⟨Z_i⟩` with respect to rotation slots.
//!
//! Two independent routes are provided: reverse-mode (adjoint) sweeps, which
//! cost one forward and one backward pass per observable, and the
//! parameter-shift rule, which re-simulates the circuit twice per rotation.
//! Feature slots re-used by several rotations accumulate the sum of their
//! per-gate derivatives.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI};

use super::{resolve, run_shifted, Angle, Circuit, Gate, StateVector};
use crate::error::Result;

/// Derivative of some scalar with respect to every feature and weight slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SlotGradient {
    pub features: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SlotGradient {
    fn zeros(n_features: usize, n_weights: usize) -> Self {
        Self {
            features: vec![0.0; n_features],
            weights: vec![0.0; n_weights],
        }
    }

    fn add(&mut self, angle: Angle, value: f64) {
        match angle {
            Angle::Feature(i) => self.features[i] += value,
            Angle::Weight(i) => self.weights[i] += value,
            Angle::Const(_) => {}
        }
    }
}

/// Row `i` holds the derivatives of `⟨Z_i⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub rows: Vec<SlotGradient>,
}

impl Jacobian {
    /// `∂⟨Z_output⟩/∂weight`.
    pub fn d_weight(&self, output: usize, weight: usize) -> f64 {
        self.rows[output].weights[weight]
    }

    /// `∂⟨Z_output⟩/∂feature`.
    pub fn d_feature(&self, output: usize, feature: usize) -> f64 {
        self.rows[output].features[feature]
    }
}

fn diagonal_observable(n_qubits: usize, coeffs: &[f64]) -> Vec<f64> {
    (0..1usize << n_qubits)
        .map(|b| {
            coeffs
                .iter()
                .enumerate()
                .map(|(q, c)| if b >> q & 1 == 0 { *c } else { -*c })
                .sum()
        })
        .collect()
}

fn adjoint_sweep(
    circuit: &Circuit,
    features: &[f64],
    weights: &[f64],
    final_state: &StateVector,
    coeffs: &[f64],
    n_features: usize,
) -> SlotGradient {
    let obs = diagonal_observable(circuit.n_qubits(), coeffs);
    let mut phi = final_state.clone();
    let mut lambda = final_state.clone();
    for (a, o) in lambda.amplitudes.iter_mut().zip(&obs) {
        *a *= *o;
    }
    let mut grad = SlotGradient::zeros(n_features, weights.len());
    let mut mu = phi.clone();
    for g in circuit.ops().iter().rev() {
        match *g {
            Gate::Ry { qubit, angle } => {
                let theta = resolve(angle, features, weights);
                phi.ry_unchecked(qubit, -theta);
                if !matches!(angle, Angle::Const(_)) {
                    // dRY(θ)/dθ = RY(θ + π) / 2
                    mu.amplitudes.copy_from_slice(&phi.amplitudes);
                    mu.ry_unchecked(qubit, theta + PI);
                    let overlap: Complex64 = lambda.inner(&mu);
                    grad.add(angle, overlap.re);
                }
                lambda.ry_unchecked(qubit, -theta);
            }
            Gate::Cnot { control, target } => {
                phi.cnot_unchecked(control, target);
                lambda.cnot_unchecked(control, target);
            }
        }
    }
    grad
}

/// Vector-Jacobian product `Σ_i coeffs[i] · ∂⟨Z_i⟩/∂slot` in a single
/// backward pass, along with the forward expectations `⟨Z_i⟩`.
pub fn expectation_vjp(
    circuit: &Circuit,
    features: &[f64],
    weights: &[f64],
    coeffs: &[f64],
) -> Result<(Vec<f64>, SlotGradient)> {
    circuit.check_bindings(features, weights)?;
    if coeffs.len() != circuit.n_qubits() {
        return Err(crate::Error::Dimension {
            context: "observable coefficients",
            expected: circuit.n_qubits(),
            actual: coeffs.len(),
        });
    }
    let state = run_shifted(circuit, features, weights, None);
    let z = state.expect_z_all();
    let grad = adjoint_sweep(circuit, features, weights, &state, coeffs, features.len());
    Ok((z, grad))
}

/// Like [`expectation_vjp`], but reuses an already simulated final state so
/// the caller can choose `coeffs` after seeing the expectations.
pub fn expectation_vjp_from_state(
    circuit: &Circuit,
    features: &[f64],
    weights: &[f64],
    final_state: &StateVector,
    coeffs: &[f64],
) -> SlotGradient {
    adjoint_sweep(
        circuit,
        features,
        weights,
        final_state,
        coeffs,
        features.len(),
    )
}

/// Full Jacobian of the per-qubit `⟨Z_i⟩` by reverse-mode sweeps.
pub fn adjoint_jacobian(circuit: &Circuit, features: &[f64], weights: &[f64]) -> Result<Jacobian> {
    circuit.check_bindings(features, weights)?;
    let state = run_shifted(circuit, features, weights, None);
    let n = circuit.n_qubits();
    let rows = (0..n)
        .map(|q| {
            let mut coeffs = vec![0.0; n];
            coeffs[q] = 1.0;
            adjoint_sweep(circuit, features, weights, &state, &coeffs, features.len())
        })
        .collect();
    Ok(Jacobian { rows })
}

/// Full Jacobian of the per-qubit `⟨Z_i⟩` by the parameter-shift rule
/// `g'(θ) = [g(θ + π/2) − g(θ − π/2)] / 2`, applied gate by gate.
pub fn parameter_shift_jacobian(
    circuit: &Circuit,
    features: &[f64],
    weights: &[f64],
) -> Result<Jacobian> {
    circuit.check_bindings(features, weights)?;
    let n = circuit.n_qubits();
    let mut rows = vec![SlotGradient::zeros(features.len(), weights.len()); n];
    for (idx, g) in circuit.ops().iter().enumerate() {
        let Gate::Ry { angle, .. } = *g else { continue };
        if matches!(angle, Angle::Const(_)) {
            continue;
        }
        let plus = run_shifted(circuit, features, weights, Some((idx, FRAC_PI_2))).expect_z_all();
        let minus = run_shifted(circuit, features, weights, Some((idx, -FRAC_PI_2))).expect_z_all();
        for (row, (p, m)) in rows.iter_mut().zip(plus.iter().zip(&minus)) {
            row.add(angle, 0.5 * (p - m));
        }
    }
    Ok(Jacobian { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::run_circuit;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn single_ry() -> Circuit {
        let mut c = Circuit::new(1).unwrap();
        c.ry(0, Angle::Weight(0)).unwrap();
        c
    }

    #[test]
    fn single_rotation_gradient_is_minus_sine() {
        let c = single_ry();
        for theta in [0.0, FRAC_PI_2, 1.1, -2.5] {
            let j = adjoint_jacobian(&c, &[], &[theta]).unwrap();
            assert_abs_diff_eq!(j.d_weight(0, 0), -theta.sin(), epsilon = 1e-12);
            let p = parameter_shift_jacobian(&c, &[], &[theta]).unwrap();
            assert_abs_diff_eq!(p.d_weight(0, 0), -theta.sin(), epsilon = 1e-12);
        }
        let j = adjoint_jacobian(&c, &[], &[FRAC_PI_2]).unwrap();
        assert_abs_diff_eq!(j.d_weight(0, 0), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn vjp_matches_weighted_jacobian_rows() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut c = Circuit::new(3).unwrap();
        for layer in 0..2 {
            for q in 0..3 {
                c.ry(q, Angle::Feature(q)).unwrap();
            }
            c.cnot(0, 1).unwrap().cnot(2, 0).unwrap();
            for q in 0..3 {
                c.ry(q, Angle::Weight(layer * 3 + q)).unwrap();
            }
        }
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let w: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
        let coeffs = [0.3, -1.2, 0.7];
        let (z, v) = expectation_vjp(&c, &x, &w, &coeffs).unwrap();
        let j = adjoint_jacobian(&c, &x, &w).unwrap();
        assert_eq!(z, run_circuit(&c, &x, &w).unwrap().expect_z_all());
        for k in 0..6 {
            let want: f64 = (0..3).map(|i| coeffs[i] * j.d_weight(i, k)).sum();
            assert_abs_diff_eq!(v.weights[k], want, epsilon = 1e-12);
        }
        for k in 0..3 {
            let want: f64 = (0..3).map(|i| coeffs[i] * j.d_feature(i, k)).sum();
            assert_abs_diff_eq!(v.features[k], want, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_rotations_have_no_gradient_slot() {
        let mut c = Circuit::new(2).unwrap();
        c.ry(0, Angle::Const(0.7)).unwrap();
        c.ry(1, Angle::Weight(0)).unwrap();
        c.cnot(1, 0).unwrap();
        let j = adjoint_jacobian(&c, &[], &[0.4]).unwrap();
        let p = parameter_shift_jacobian(&c, &[], &[0.4]).unwrap();
        for q in 0..2 {
            assert_abs_diff_eq!(j.d_weight(q, 0), p.d_weight(q, 0), epsilon = 1e-12);
        }
    }
}
