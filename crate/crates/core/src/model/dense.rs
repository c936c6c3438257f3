use rand::Rng;
use serde::{Deserialize, Serialize};

use super::check_len;
use crate::error::Result;

/// Affine map `y = W x + b` with `W` stored row-major as `n_out × n_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    /// Uniform on `[-1/√n_in, 1/√n_in]` for weights and bias.
    pub fn init<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (n_in as f64).sqrt();
        let mut draw = || rng.random_range(-bound..=bound);
        let weights = (0..n_in * n_out).map(|_| draw()).collect();
        let bias = (0..n_out).map(|_| draw()).collect();
        Self {
            n_in,
            n_out,
            weights,
            bias,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.n_in)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    /// Given `dy`, adds parameter gradients into `grad` (weights then bias)
    /// and returns `dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let (gw, gb) = grad.split_at_mut(self.weights.len());
        let mut dx = vec![0.0; self.n_in];
        for (o, &d) in dy.iter().enumerate() {
            let row = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            let grow = &mut gw[o * self.n_in..(o + 1) * self.n_in];
            for i in 0..self.n_in {
                grow[i] += d * x[i];
                dx[i] += d * row[i];
            }
            gb[o] += d;
        }
        dx
    }

    pub fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.weights);
        out.extend_from_slice(&self.bias);
    }

    /// Reads this layer's parameters from the front of `params`; returns the rest.
    pub fn read_params<'a>(&mut self, params: &'a [f64]) -> Result<&'a [f64]> {
        let n = self.param_count();
        if params.len() < n {
            check_len("dense layer parameters", n, params.len())?;
        }
        let (mine, rest) = params.split_at(n);
        let (w, b) = mine.split_at(self.weights.len());
        self.weights.copy_from_slice(w);
        self.bias.copy_from_slice(b);
        Ok(rest)
    }
}

/// Linear classification head on top of a feature vector.
///
/// `logits[c] = Σ_i features[i] · weights[i][c] + bias[c]`, with `weights`
/// stored as `n_features × n_classes` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub n_features: usize,
    pub n_classes: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearHead {
    pub fn zeros(n_features: usize, n_classes: usize) -> Self {
        Self {
            n_features,
            n_classes,
            weights: vec![0.0; n_features * n_classes],
            bias: vec![0.0; n_classes],
        }
    }

    pub fn init<R: Rng + ?Sized>(n_features: usize, n_classes: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (n_features as f64).sqrt();
        let mut draw = || rng.random_range(-bound..=bound);
        let weights = (0..n_features * n_classes).map(|_| draw()).collect();
        let bias = (0..n_classes).map(|_| draw()).collect();
        Self {
            n_features,
            n_classes,
            weights,
            bias,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn forward(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (zi, row) in z.iter().zip(self.weights.chunks_exact(self.n_classes)) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += zi * w;
            }
        }
        out
    }

    /// Adds gradients for `dlogits` into `grad` (weights then bias); returns `dz`.
    pub fn backward(&self, z: &[f64], dlogits: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let (gw, gb) = grad.split_at_mut(self.weights.len());
        let mut dz = vec![0.0; self.n_features];
        for i in 0..self.n_features {
            let row = &self.weights[i * self.n_classes..(i + 1) * self.n_classes];
            let grow = &mut gw[i * self.n_classes..(i + 1) * self.n_classes];
            for c in 0..self.n_classes {
                grow[c] += z[i] * dlogits[c];
                dz[i] += row[c] * dlogits[c];
            }
        }
        for (b, d) in gb.iter_mut().zip(dlogits) {
            *b += d;
        }
        dz
    }

    pub fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.weights);
        out.extend_from_slice(&self.bias);
    }

    pub fn read_params<'a>(&mut self, params: &'a [f64]) -> Result<&'a [f64]> {
        let n = self.param_count();
        if params.len() < n {
            check_len("head parameters", n, params.len())?;
        }
        let (mine, rest) = params.split_at(n);
        let (w, b) = mine.split_at(self.weights.len());
        self.weights.copy_from_slice(w);
        self.bias.copy_from_slice(b);
        Ok(rest)
    }
}
