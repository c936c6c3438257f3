use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature z-scoring with statistics fitted on a subset of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation of the fit rows.
    pub std: Vec<f64>,
    /// Features with zero variance on the fit rows; they are only centred.
    pub zero_variance: Vec<bool>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>], fit_indices: &[usize]) -> Result<Self> {
        if fit_indices.is_empty() {
            return Err(Error::Empty("standardization fit rows"));
        }
        let p = x[fit_indices[0]].len();
        let n = fit_indices.len() as f64;
        let mut mean = vec![0.0; p];
        for &i in fit_indices {
            for (m, v) in mean.iter_mut().zip(&x[i]) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; p];
        for &i in fit_indices {
            for ((s, v), m) in var.iter_mut().zip(&x[i]).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let std: Vec<f64> = var.iter().map(|s| (s / n).sqrt()).collect();
        let zero_variance = std.iter().map(|s| *s < 1e-12).collect();
        Ok(Self {
            mean,
            std,
            zero_variance,
        })
    }

    /// True if any feature was passed through centred only.
    pub fn has_zero_variance(&self) -> bool {
        self.zero_variance.iter().any(|z| *z)
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(self.std.iter().zip(&self.zero_variance))
            .map(|((v, m), (s, zero))| if *zero { v - m } else { (v - m) / s })
            .collect()
    }

    pub fn transform(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.transform_row(r)).collect()
    }
}
