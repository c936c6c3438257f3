use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

/// Column roles for a CSV file.
///
/// With `has_header = false`, columns are addressed by their zero-based
/// position written as a string (`"0"`, `"1"`, ...).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub feature_columns: Vec<String>,
    pub label_column: String,
    /// Raw label text → class index. Indices must be exactly `0..n_classes`.
    pub label_mapping: BTreeMap<String, usize>,
    #[serde(default = "default_true")]
    pub has_header: bool,
}

fn default_true() -> bool {
    true
}

impl CsvSchema {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    fn class_names(&self) -> Result<Vec<String>> {
        let n = self.label_mapping.len();
        let mut names = vec![None; n];
        for (raw, &idx) in &self.label_mapping {
            if idx >= n || names[idx].is_some() {
                return Err(Error::Config(format!(
                    "label mapping must assign each of 0..{n} exactly once (`{raw}` -> {idx})"
                )));
            }
            names[idx] = Some(raw.clone());
        }
        Ok(names.into_iter().map(Option::unwrap).collect())
    }
}

/// Reads a dataset from a CSV file.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    load_csv_str(&name, &text, schema)
}

/// Parses CSV text. Error rows are 1-based file line numbers.
pub fn load_csv_str(name: &str, text: &str, schema: &CsvSchema) -> Result<Dataset> {
    let class_names = schema.class_names()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header: Vec<String> = if schema.has_header {
        reader
            .headers()
            .map_err(|e| Error::Data(format!("unreadable header: {e}")))?
            .iter()
            .map(str::to_owned)
            .collect()
    } else {
        let first_len = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .map_or(0, |l| l.split(',').count());
        (0..first_len).map(|i| i.to_string()).collect()
    };
    let position = |col: &str| {
        header
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| Error::MissingColumn(col.to_owned()))
    };
    let feature_idx = schema
        .feature_columns
        .iter()
        .map(|c| position(c))
        .collect::<Result<Vec<_>>>()?;
    let label_idx = position(&schema.label_column)?;

    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1 + usize::from(schema.has_header);
        let record = record.map_err(|e| Error::Cell {
            row: line,
            column: "*".into(),
            message: e.to_string(),
        })?;
        let cell = |idx: usize, col: &str| {
            record.get(idx).ok_or_else(|| Error::Cell {
                row: line,
                column: col.to_owned(),
                message: "missing cell".into(),
            })
        };
        let mut row = Vec::with_capacity(feature_idx.len());
        for (&idx, col) in feature_idx.iter().zip(&schema.feature_columns) {
            let raw = cell(idx, col)?;
            let v: f64 = raw.parse().map_err(|_| Error::Cell {
                row: line,
                column: col.clone(),
                message: format!("cannot parse `{raw}` as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Cell {
                    row: line,
                    column: col.clone(),
                    message: format!("non-finite value `{raw}`"),
                });
            }
            row.push(v);
        }
        let raw_label = cell(label_idx, &schema.label_column)?;
        let label = *schema
            .label_mapping
            .get(raw_label)
            .ok_or_else(|| Error::Cell {
                row: line,
                column: schema.label_column.clone(),
                message: format!("unknown label `{raw_label}`"),
            })?;
        x.push(row);
        y.push(label);
    }
    Dataset::new(name, schema.feature_columns.clone(), class_names, x, y)
}

/// Writes `data` with its feature names as header and the class name in a
/// trailing `label` column; returns the schema that reads it back.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<CsvSchema> {
    let path = path.as_ref();
    let schema = CsvSchema {
        feature_columns: data.feature_names.clone(),
        label_column: "label".into(),
        label_mapping: data
            .class_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect(),
        has_header: true,
    };
    if schema.label_mapping.len() != data.class_names.len()
        || data.feature_names.iter().any(|f| f == "label")
    {
        return Err(Error::Data(
            "class names must be distinct and `label` is reserved".into(),
        ));
    }
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    let mut header = data.feature_names.clone();
    header.push("label".into());
    w.write_record(&header).map_err(io)?;
    for (row, &label) in data.x.iter().zip(&data.y) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(data.class_names[label].clone());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(schema)
}
