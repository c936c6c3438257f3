use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.6, 0.2, 0.2);
pub const DEFAULT_SPLIT_SEED: u64 = 20_210_801;

/// Train/validation/test row indices, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub fractions: (f64, f64, f64),
}

impl Split {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json("split", e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }
}

fn check_fractions((a, b, c): (f64, f64, f64)) -> Result<()> {
    let ok = [a, b, c].iter().all(|f| f.is_finite() && *f > 0.0) && (a + b + c - 1.0).abs() < 1e-9;
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "split fractions ({a}, {b}, {c}) must be positive and sum to 1"
        )))
    }
}

/// Per-class shuffled split. Validation and test receive `round(n_c·f)` rows
/// of each class (at least one), train keeps the remainder.
pub fn stratified_split(data: &Dataset, fractions: (f64, f64, f64), seed: u64) -> Result<Split> {
    check_fractions(fractions)?;
    let mut rng = seed::rng(seed, "split", 0);
    let mut split = Split {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed,
        fractions,
    };
    for class in 0..data.n_classes() {
        let mut rows: Vec<usize> = (0..data.len()).filter(|&i| data.y[i] == class).collect();
        let n = rows.len();
        if n < 3 {
            return Err(Error::ClassTooSmall {
                class,
                count: n,
                parts: 3,
            });
        }
        rows.shuffle(&mut rng);
        let n_val = ((n as f64 * fractions.1).round() as usize).max(1);
        let n_test = ((n as f64 * fractions.2).round() as usize).max(1);
        // keep at least one training row
        let (n_val, n_test) = if n_val + n_test >= n {
            let n_test = n_test.min(n - 2);
            (n - 1 - n_test, n_test)
        } else {
            (n_val, n_test)
        };
        split.validation.extend_from_slice(&rows[..n_val]);
        split.test.extend_from_slice(&rows[n_val..n_val + n_test]);
        split.train.extend_from_slice(&rows[n_val + n_test..]);
    }
    split.train.sort_unstable();
    split.validation.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}
