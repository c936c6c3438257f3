use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// Gaussian blobs around hypercube vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
    /// Half edge length of the hypercube carrying the centroids.
    pub class_sep: f64,
    pub noise_std: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_samples: 400,
            n_features: 4,
            n_classes: 3,
            class_sep: 0.8,
            noise_std: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_features == 0 || self.n_classes < 2 {
            return Err(Error::Config(
                "synthetic data needs n_features >= 1 and n_classes >= 2".into(),
            ));
        }
        if self.n_features < usize::BITS as usize && self.n_classes > 1 << self.n_features {
            return Err(Error::Config(format!(
                "{} classes do not fit on the {} vertices of a {}-cube",
                self.n_classes,
                1usize << self.n_features,
                self.n_features
            )));
        }
        if self.n_samples < self.n_classes {
            return Err(Error::Config(format!(
                "{} samples cannot cover {} classes",
                self.n_samples, self.n_classes
            )));
        }
        if !(self.class_sep >= 0.0 && self.class_sep.is_finite()) {
            return Err(Error::Config(format!(
                "class_sep {} must be >= 0",
                self.class_sep
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config(format!(
                "noise_std {} must be >= 0",
                self.noise_std
            )));
        }
        Ok(())
    }

    /// Centroid of `class`: vertex number `class` of the reflected Gray-code
    /// walk over {-1,+1}^d, scaled by `class_sep`.
    pub fn centroid(&self, class: usize) -> Vec<f64> {
        let g = class ^ (class >> 1);
        (0..self.n_features)
            .map(|j| {
                if (g >> j) & 1 == 1 {
                    self.class_sep
                } else {
                    -self.class_sep
                }
            })
            .collect()
    }
}

/// Classes are as balanced as possible, earlier classes taking the remainder
/// (400 rows, 3 classes gives 134/133/133). Rows are shuffled.
pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let mut rng = seed::rng(seed, "synthetic", 0);
    let noise = Normal::new(0.0, config.noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let base = config.n_samples / config.n_classes;
    let extra = config.n_samples % config.n_classes;
    let mut rows = Vec::with_capacity(config.n_samples);
    for class in 0..config.n_classes {
        let centre = config.centroid(class);
        for _ in 0..base + usize::from(class < extra) {
            let x: Vec<f64> = centre.iter().map(|c| c + noise.sample(&mut rng)).collect();
            rows.push((x, class));
        }
    }
    rows.shuffle(&mut rng);
    let (x, y) = rows.into_iter().unzip();
    Dataset::new(
        "synthetic",
        (0..config.n_features).map(|j| format!("x{j}")).collect(),
        (0..config.n_classes)
            .map(|c| format!("class_{c}"))
            .collect(),
        x,
        y,
    )
}
