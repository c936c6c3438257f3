//! Iris, Wine and Breast Cancer, bundled as CSV with a SHA-256 manifest.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{load_csv_str, CsvSchema, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    Iris,
    Wine,
    BreastCancer,
}

impl Builtin {
    pub const ALL: [Builtin; 3] = [Builtin::Iris, Builtin::Wine, Builtin::BreastCancer];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Iris => "iris",
            Builtin::Wine => "wine",
            Builtin::BreastCancer => "breast_cancer",
        }
    }

    fn files(self) -> (&'static str, &'static str) {
        match self {
            Builtin::Iris => (
                include_str!("../../data/iris.csv"),
                include_str!("../../data/iris.schema.json"),
            ),
            Builtin::Wine => (
                include_str!("../../data/wine.csv"),
                include_str!("../../data/wine.schema.json"),
            ),
            Builtin::BreastCancer => (
                include_str!("../../data/breast_cancer.csv"),
                include_str!("../../data/breast_cancer.schema.json"),
            ),
        }
    }
}

impl std::str::FromStr for Builtin {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Builtin::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown builtin dataset `{s}`")))
    }
}

const MANIFEST: &str = include_str!("../../data/SHA256SUMS");

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Checks each bundled CSV against the manifest.
pub fn verify_bundled_checksums() -> Result<()> {
    for b in Builtin::ALL {
        let file = format!("{}.csv", b.name());
        let expected = MANIFEST
            .lines()
            .filter_map(|l| l.split_once("  "))
            .find(|(_, f)| *f == file)
            .map(|(h, _)| h)
            .ok_or_else(|| Error::Data(format!("{file} missing from checksum manifest")))?;
        let actual = sha256_hex(b.files().0);
        if actual != expected {
            return Err(Error::Data(format!(
                "{file} checksum mismatch: manifest {expected}, bundled {actual}"
            )));
        }
    }
    Ok(())
}

/// Loads a bundled dataset.
pub fn builtin(which: Builtin) -> Result<Dataset> {
    let (csv, schema) = which.files();
    let schema: CsvSchema = serde_json::from_str(schema)
        .map_err(|e| Error::json(format!("{} schema", which.name()), e))?;
    load_csv_str(which.name(), csv, &schema)
}
