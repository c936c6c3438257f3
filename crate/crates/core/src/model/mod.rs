//! Classifiers trained by [`crate::train`].
//!
//! Every model exposes its trainable scalars as one flat vector so the
//! optimisers stay model-agnostic. The flat order for the quantum classifier
//! is: encoder parameters (if any), quantum rotation weights, head weights,
//! head bias.

mod ansatz;
mod dense;
mod encoder;
mod mlp;

pub use ansatz::{build_circuit, AnsatzSpec, FeatureStage, QuantumClassifier};
pub use dense::{Dense, LinearHead};
pub use encoder::HybridEncoder;
pub use mlp::Mlp;

use crate::error::Result;

/// A differentiable classifier with a flat parameter vector.
pub trait Classifier {
    fn n_inputs(&self) -> usize;
    fn n_classes(&self) -> usize;

    /// Number of trainable scalars.
    fn param_count(&self) -> usize;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]) -> Result<()>;

    fn logits(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Cross-entropy loss of one sample; adds `∂loss/∂params` into `grad`.
    fn accumulate_gradient(&self, x: &[f64], label: usize, grad: &mut [f64]) -> Result<f64>;
}

pub fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(crate::Error::Dimension {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}
