use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_len, Classifier, Dense};
use crate::error::Result;
use crate::train::softmax_cross_entropy_grad;

/// One-hidden-layer `tanh` network, the classical comparison model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    hidden: Dense,
    output: Dense,
}

impl Mlp {
    pub fn init<R: Rng + ?Sized>(
        n_inputs: usize,
        n_hidden: usize,
        n_classes: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            hidden: Dense::init(n_inputs, n_hidden, rng),
            output: Dense::init(n_hidden, n_classes, rng),
        }
    }

    pub fn zeros(n_inputs: usize, n_hidden: usize, n_classes: usize) -> Self {
        Self {
            hidden: Dense::zeros(n_inputs, n_hidden),
            output: Dense::zeros(n_hidden, n_classes),
        }
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        self.hidden.forward(x).into_iter().map(f64::tanh).collect()
    }
}

impl Classifier for Mlp {
    fn n_inputs(&self) -> usize {
        self.hidden.n_in
    }

    fn n_classes(&self) -> usize {
        self.output.n_out
    }

    fn param_count(&self) -> usize {
        self.hidden.param_count() + self.output.param_count()
    }

    fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.hidden.write_params(&mut out);
        self.output.write_params(&mut out);
        out
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        check_len("mlp parameters", self.param_count(), params.len())?;
        let rest = self.hidden.read_params(params)?;
        self.output.read_params(rest)?;
        Ok(())
    }

    fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("mlp input", self.n_inputs(), x.len())?;
        Ok(self.output.forward(&self.hidden(x)))
    }

    fn accumulate_gradient(&self, x: &[f64], label: usize, grad: &mut [f64]) -> Result<f64> {
        check_len("mlp input", self.n_inputs(), x.len())?;
        check_len("gradient buffer", self.param_count(), grad.len())?;
        let h = self.hidden(x);
        let logits = self.output.forward(&h);
        let (loss, dlogits) = softmax_cross_entropy_grad(&logits, label)?;
        let (g_hidden, g_out) = grad.split_at_mut(self.hidden.param_count());
        let dh = self.output.backward(&h, &dlogits, g_out);
        let dpre: Vec<f64> = dh.iter().zip(&h).map(|(d, t)| d * (1.0 - t * t)).collect();
        self.hidden.backward(x, &dpre, g_hidden);
        Ok(loss)
    }
}
