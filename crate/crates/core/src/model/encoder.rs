use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{check_len, Dense};
use crate::error::{Error, Result};

/// Classical front end that compresses `p` features to `q` rotation angles:
/// three affine layers, `tanh` after each, final output scaled by `π`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridEncoder {
    layers: Vec<Dense>,
}

pub(crate) struct EncoderTrace {
    /// Layer inputs: `inputs[0]` is the raw sample.
    inputs: Vec<Vec<f64>>,
    /// `tanh` outputs of each layer.
    activations: Vec<Vec<f64>>,
}

impl HybridEncoder {
    fn check_dims(dims: &[usize]) -> Result<()> {
        if dims.len() != 4 || dims.contains(&0) {
            return Err(Error::Config(format!(
                "encoder needs 4 positive layer sizes [p, h1, h2, q], got {dims:?}"
            )));
        }
        Ok(())
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::check_dims(dims)?;
        Ok(Self {
            layers: dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        })
    }

    pub fn init<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        Self::check_dims(dims)?;
        Ok(Self {
            layers: dims
                .windows(2)
                .map(|w| Dense::init(w[0], w[1], rng))
                .collect(),
        })
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].n_in)
            .chain(self.layers.iter().map(|l| l.n_out))
            .collect()
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.encode_traced(x)?.0)
    }

    pub(crate) fn encode_traced(&self, x: &[f64]) -> Result<(Vec<f64>, EncoderTrace)> {
        check_len("encoder input", self.n_inputs(), x.len())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for layer in &self.layers {
            let a: Vec<f64> = layer.forward(&h).into_iter().map(f64::tanh).collect();
            inputs.push(std::mem::replace(&mut h, a.clone()));
            activations.push(a);
        }
        let out = h.iter().map(|v| PI * v).collect();
        Ok((
            out,
            EncoderTrace {
                inputs,
                activations,
            },
        ))
    }

    /// Backpropagates `d_out` (gradient w.r.t. the scaled angles) and adds
    /// parameter gradients to `grad`, laid out layer by layer.
    pub(crate) fn backward(&self, trace: &EncoderTrace, d_out: &[f64], grad: &mut [f64]) {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.param_count();
        }
        let mut d: Vec<f64> = d_out.iter().map(|v| PI * v).collect();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let a = &trace.activations[idx];
            let dpre: Vec<f64> = d.iter().zip(a).map(|(g, t)| g * (1.0 - t * t)).collect();
            let slice = &mut grad[offsets[idx]..offsets[idx] + layer.param_count()];
            d = layer.backward(&trace.inputs[idx], &dpre, slice);
        }
    }

    pub fn write_params(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            l.write_params(out);
        }
    }

    pub fn read_params<'a>(&mut self, mut params: &'a [f64]) -> Result<&'a [f64]> {
        for l in &mut self.layers {
            params = l.read_params(params)?;
        }
        Ok(params)
    }
}
