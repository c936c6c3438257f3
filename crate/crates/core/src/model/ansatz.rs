use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::{check_len, Classifier, HybridEncoder, LinearHead};
use crate::error::{Error, Result};
use crate::layout::{EdgeSet, Genotype};
use crate::sim::{self, Angle, Circuit, Gate};
use crate::train::softmax_cross_entropy_grad;

/// Layered ansatz template. Every layer applies `RY(x_i)` to each qubit,
/// then the genotype's `CNOT` sequence, then `RY(w_{l,i})` to each qubit.
/// All layers share the same genotype.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub n_qubits: usize,
    pub depth: usize,
    pub genotype: Genotype,
}

impl AnsatzSpec {
    pub fn new(n_qubits: usize, depth: usize, genotype: Genotype) -> Result<Self> {
        let spec = Self {
            n_qubits,
            depth,
            genotype,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Config("ansatz depth must be at least 1".into()));
        }
        let edges = EdgeSet::new(self.n_qubits)?;
        self.genotype.validate(edges.len())
    }

    pub fn n_weights(&self) -> usize {
        self.depth * self.n_qubits
    }
}

/// Builds the circuit for `spec`. Feature slot `i` feeds qubit `i` in every
/// layer; weight slot `l·n + i` is the trainable rotation on qubit `i` in
/// layer `l`.
pub fn build_circuit(spec: &AnsatzSpec, n_features: usize) -> Result<Circuit> {
    check_len("ansatz features", spec.n_qubits, n_features)?;
    spec.validate()?;
    let edges = EdgeSet::new(spec.n_qubits)?;
    let cnots = spec.genotype.decode(&edges)?;
    let mut c = Circuit::new(spec.n_qubits)?;
    for layer in 0..spec.depth {
        for q in 0..spec.n_qubits {
            c.ry(q, Angle::Feature(q))?;
        }
        for g in &cnots {
            if let Gate::Cnot { control, target } = *g {
                c.cnot(control, target)?;
            }
        }
        for q in 0..spec.n_qubits {
            c.ry(q, Angle::Weight(layer * spec.n_qubits + q))?;
        }
    }
    Ok(c)
}

/// Which representation [`QuantumClassifier::features`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureStage {
    /// Rotation angles entering the ansatz (encoder output or raw features).
    Pre,
    /// Per-qubit `⟨Z_i⟩` leaving the ansatz.
    Post,
}

impl std::str::FromStr for FeatureStage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pre" => Ok(FeatureStage::Pre),
            "post" => Ok(FeatureStage::Post),
            other => Err(Error::Config(format!(
                "unknown feature stage `{other}` (expected pre or post)"
            ))),
        }
    }
}

/// Optional encoder → ansatz → per-qubit `⟨Z⟩` → linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumClassifier {
    spec: AnsatzSpec,
    circuit: Circuit,
    pub quantum_weights: Vec<f64>,
    pub head: LinearHead,
    pub encoder: Option<HybridEncoder>,
}

impl QuantumClassifier {
    /// Assembles a model from explicit parameters.
    pub fn from_parts(
        spec: AnsatzSpec,
        quantum_weights: Vec<f64>,
        head: LinearHead,
        encoder: Option<HybridEncoder>,
    ) -> Result<Self> {
        let circuit = build_circuit(&spec, spec.n_qubits)?;
        check_len("quantum weights", spec.n_weights(), quantum_weights.len())?;
        check_len("head inputs", spec.n_qubits, head.n_features)?;
        if let Some(e) = &encoder {
            check_len("encoder outputs", spec.n_qubits, e.n_outputs())?;
        }
        Ok(Self {
            spec,
            circuit,
            quantum_weights,
            head,
            encoder,
        })
    }

    /// Random initialisation: angles uniform on `[0, 2π)`, head and encoder
    /// uniform on `±1/√fan_in`. Encoder first, then angles, then head.
    pub fn init<R: Rng + ?Sized>(
        spec: AnsatzSpec,
        n_classes: usize,
        encoder_dims: Option<&[usize]>,
        rng: &mut R,
    ) -> Result<Self> {
        let encoder = encoder_dims
            .map(|dims| HybridEncoder::init(dims, rng))
            .transpose()?;
        let quantum_weights = (0..spec.n_weights())
            .map(|_| rng.random_range(0.0..TAU))
            .collect();
        let head = LinearHead::init(spec.n_qubits, n_classes, rng);
        Self::from_parts(spec, quantum_weights, head, encoder)
    }

    pub fn spec(&self) -> &AnsatzSpec {
        &self.spec
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    fn angles(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.encoder {
            Some(e) => e.encode(x),
            None => {
                check_len("model input", self.spec.n_qubits, x.len())?;
                Ok(x.to_vec())
            }
        }
    }

    /// Per-qubit `⟨Z_i⟩` for one sample.
    pub fn expectations(&self, x: &[f64]) -> Result<Vec<f64>> {
        let angles = self.angles(x)?;
        Ok(sim::run_circuit(&self.circuit, &angles, &self.quantum_weights)?.expect_z_all())
    }

    /// The pre- or post-ansatz representation of one sample.
    pub fn features(&self, x: &[f64], stage: FeatureStage) -> Result<Vec<f64>> {
        match stage {
            FeatureStage::Pre => self.angles(x),
            FeatureStage::Post => self.expectations(x),
        }
    }

    fn encoder_len(&self) -> usize {
        self.encoder.as_ref().map_or(0, HybridEncoder::param_count)
    }
}

impl Classifier for QuantumClassifier {
    fn n_inputs(&self) -> usize {
        self.encoder
            .as_ref()
            .map_or(self.spec.n_qubits, HybridEncoder::n_inputs)
    }

    fn n_classes(&self) -> usize {
        self.head.n_classes
    }

    fn param_count(&self) -> usize {
        self.encoder_len() + self.quantum_weights.len() + self.head.param_count()
    }

    fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        if let Some(e) = &self.encoder {
            e.write_params(&mut out);
        }
        out.extend_from_slice(&self.quantum_weights);
        self.head.write_params(&mut out);
        out
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        check_len("model parameters", self.param_count(), params.len())?;
        let mut rest = params;
        if let Some(e) = &mut self.encoder {
            rest = e.read_params(rest)?;
        }
        let (q, rest) = rest.split_at(self.quantum_weights.len());
        self.quantum_weights.copy_from_slice(q);
        self.head.read_params(rest)?;
        Ok(())
    }

    fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.head.forward(&self.expectations(x)?))
    }

    fn accumulate_gradient(&self, x: &[f64], label: usize, grad: &mut [f64]) -> Result<f64> {
        check_len("gradient buffer", self.param_count(), grad.len())?;
        let (angles, trace) = match &self.encoder {
            Some(e) => {
                let (a, t) = e.encode_traced(x)?;
                (a, Some(t))
            }
            None => (self.angles(x)?, None),
        };
        let state = sim::run_circuit(&self.circuit, &angles, &self.quantum_weights)?;
        let z = state.expect_z_all();
        let logits = self.head.forward(&z);
        let (loss, dlogits) = softmax_cross_entropy_grad(&logits, label)?;

        let enc_len = self.encoder_len();
        let (g_enc, rest) = grad.split_at_mut(enc_len);
        let (g_q, g_head) = rest.split_at_mut(self.quantum_weights.len());
        let dz = self.head.backward(&z, &dlogits, g_head);
        let slot = sim::expectation_vjp_from_state(
            &self.circuit,
            &angles,
            &self.quantum_weights,
            &state,
            &dz,
        );
        for (g, d) in g_q.iter_mut().zip(&slot.weights) {
            *g += d;
        }
        if let (Some(e), Some(t)) = (&self.encoder, trace) {
            e.backward(&t, &slot.features, g_enc);
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{ring_genotype, Ring};
    use crate::sim::circuit_unitary;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn iris_spec() -> AnsatzSpec {
        AnsatzSpec::new(4, 2, ring_genotype(4, Ring::Ring1).unwrap()).unwrap()
    }

    #[test]
    fn structure_counts() {
        let spec = AnsatzSpec::new(2, 1, Genotype::new(vec![], 2).unwrap()).unwrap();
        let c = build_circuit(&spec, 2).unwrap();
        assert_eq!((c.count_ry(), c.count_cnot()), (4, 0));

        let c = build_circuit(&iris_spec(), 4).unwrap();
        assert_eq!((c.count_ry(), c.count_cnot()), (16, 8));
        assert_eq!(c.n_weights(), 8);
        assert!(build_circuit(&iris_spec(), 3).is_err());
        assert!(AnsatzSpec::new(4, 0, Genotype::new(vec![], 12).unwrap()).is_err());
    }

    #[test]
    fn iris_parameter_count() {
        let m = QuantumClassifier::init(iris_spec(), 3, None, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(m.param_count(), 23);
        let hybrid = QuantumClassifier::init(
            iris_spec(),
            3,
            Some(&[13, 8, 6, 4]),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert_eq!(hybrid.param_count(), 194 + 23);
    }

    #[test]
    fn identity_circuit_logits() {
        let mut m =
            QuantumClassifier::init(iris_spec(), 3, None, &mut ChaCha8Rng::seed_from_u64(4))
                .unwrap();
        m.quantum_weights.iter_mut().for_each(|w| *w = 0.0);
        let z = m.expectations(&[0.0; 4]).unwrap();
        for v in &z {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-12);
        }
        let logits = m.logits(&[0.0; 4]).unwrap();
        for (c, logit) in logits.iter().enumerate() {
            let col: f64 = (0..4).map(|i| m.head.weights[i * 3 + c]).sum();
            assert_abs_diff_eq!(*logit, col + m.head.bias[c], epsilon = 1e-12);
        }

        m.head.weights.iter_mut().for_each(|w| *w = 0.0);
        assert_eq!(m.logits(&[0.3, 1.0, -2.0, 5.0]).unwrap(), m.head.bias);
    }

    #[test]
    fn logits_match_unitary_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let g = crate::layout::random_genotype(4, 5, &mut rng).unwrap();
            let m = QuantumClassifier::init(AnsatzSpec::new(4, 2, g).unwrap(), 3, None, &mut rng)
                .unwrap();
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let u = circuit_unitary(m.circuit(), &x, &m.quantum_weights).unwrap();
            let psi = u.column(0);
            let z: Vec<f64> = (0..4)
                .map(|q| {
                    psi.iter()
                        .enumerate()
                        .map(|(b, a)| {
                            if b >> q & 1 == 0 {
                                a.norm_sqr()
                            } else {
                                -a.norm_sqr()
                            }
                        })
                        .sum()
                })
                .collect();
            let want = m.head.forward(&z);
            for (a, b) in m.logits(&x).unwrap().iter().zip(&want) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn angle_periodicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = QuantumClassifier::init(iris_spec(), 3, None, &mut rng).unwrap();
        let x = [0.4, -1.1, 2.0, 0.9];
        let base = m.logits(&x).unwrap();
        for i in 0..8 {
            let mut shifted = m.clone();
            shifted.quantum_weights[i] += TAU;
            for (a, b) in shifted.logits(&x).unwrap().iter().zip(&base) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn gate_order_matters() {
        let a = AnsatzSpec::new(3, 1, Genotype::new(vec![0, 3], 6).unwrap()).unwrap();
        let b = AnsatzSpec::new(3, 1, Genotype::new(vec![3, 0], 6).unwrap()).unwrap();
        assert_ne!(build_circuit(&a, 3).unwrap(), build_circuit(&b, 3).unwrap());
    }

    #[test]
    fn params_roundtrip_and_dimension_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = QuantumClassifier::init(iris_spec(), 3, Some(&[6, 5, 5, 4]), &mut rng).unwrap();
        let p: Vec<f64> = (0..m.param_count()).map(|i| i as f64 * 0.01).collect();
        m.set_params(&p).unwrap();
        assert_eq!(m.params(), p);
        assert!(m.set_params(&p[1..]).is_err());
        assert!(m.logits(&[0.0; 4]).is_err());
        let mut g = vec![0.0; m.param_count()];
        assert!(m.accumulate_gradient(&[0.0; 6], 3, &mut g).is_err());
    }

    #[test]
    fn stages() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = QuantumClassifier::init(iris_spec(), 3, None, &mut rng).unwrap();
        let x = [5.1, 3.5, 1.4, 0.2];
        assert_eq!(m.features(&x, FeatureStage::Pre).unwrap(), x.to_vec());
        for v in m.features(&x, FeatureStage::Post).unwrap() {
            assert!(v.abs() <= 1.0 + 1e-12);
        }
    }
}
