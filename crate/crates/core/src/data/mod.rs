//! Datasets, CSV ingestion, synthetic data, scaling and stratified splits.

mod builtin;
mod csv_io;
mod scale;
mod split;
mod synth;

pub use builtin::{builtin, verify_bundled_checksums, Builtin};
pub use csv_io::{load_csv, load_csv_str, write_csv, CsvSchema};
pub use scale::Standardizer;
pub use split::{stratified_split, Split, DEFAULT_FRACTIONS, DEFAULT_SPLIT_SEED};
pub use synth::{generate_synthetic, SynthConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature matrix with integer class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
}

impl Dataset {
    /// Validates shape, label range, finiteness and that every class is present.
    pub fn new(
        name: impl Into<String>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
        x: Vec<Vec<f64>>,
        y: Vec<usize>,
    ) -> Result<Self> {
        let d = Self {
            name: name.into(),
            feature_names,
            class_names,
            x,
            y,
        };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        if self.x.is_empty() {
            return Err(Error::Empty("dataset has no rows"));
        }
        if self.x.len() != self.y.len() {
            return Err(Error::Dimension {
                context: "label count",
                expected: self.x.len(),
                actual: self.y.len(),
            });
        }
        let p = self.feature_names.len();
        let mut seen = vec![0usize; self.n_classes()];
        for (row, (xs, &label)) in self.x.iter().zip(&self.y).enumerate() {
            if xs.len() != p {
                return Err(Error::Data(format!(
                    "row {row} has {} features, expected {p}",
                    xs.len()
                )));
            }
            if let Some(col) = xs.iter().position(|v| !v.is_finite()) {
                return Err(Error::Cell {
                    row,
                    column: self.feature_names[col].clone(),
                    message: "non-finite value".into(),
                });
            }
            if label >= seen.len() {
                return Err(Error::InvalidLabel {
                    label,
                    n_classes: seen.len(),
                });
            }
            seen[label] += 1;
        }
        if let Some(c) = seen.iter().position(|n| *n == 0) {
            return Err(Error::Data(format!(
                "class `{}` has no samples",
                self.class_names[c]
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Rows at `indices`, in that order. Classes may be absent from a subset.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            x: indices.iter().map(|&i| self.x[i].clone()).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
        }
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes()];
        for &y in &self.y {
            c[y] += 1;
        }
        c
    }

    /// A copy with `x` replaced (same rows and labels).
    pub fn with_features(&self, x: Vec<Vec<f64>>, feature_names: Vec<String>) -> Dataset {
        Dataset {
            name: self.name.clone(),
            feature_names,
            class_names: self.class_names.clone(),
            x,
            y: self.y.clone(),
        }
    }
}
