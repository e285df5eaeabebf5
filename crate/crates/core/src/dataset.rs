//! CSV datasets: one example per row, integer label first, features after.
//!
//! Datasets provide the original points to attack and the other-class
//! examples used to seed initial search directions. There is no header by
//! default; pass `skip_header = true` to drop one leading line.

use std::path::Path;

use thiserror::Error;

use crate::oracle::{FeatureVector, Label};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected {expected} feature columns, got {got}")]
    Ragged {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}, column {column}: cannot parse {token:?} as {expected}")]
    Parse {
        line: usize,
        column: usize,
        token: String,
        expected: &'static str,
    },
    #[error("line {line}: label {label} out of range for {classes} classes")]
    LabelRange {
        line: usize,
        label: usize,
        classes: usize,
    },
    #[error("line {line}: dimension {got} does not match oracle dimension {expected}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: row has no feature columns")]
    NoFeatures { line: usize },
}

/// One labeled example.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetRecord {
    pub features: FeatureVector,
    pub label: Label,
}

/// Records in file order, plus the line number each came from (for error
/// reporting during later validation).
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub records: Vec<DatasetRecord>,
    lines: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Feature dimension, when the dataset is non-empty.
    pub fn dim(&self) -> Option<usize> {
        self.records.first().map(|r| r.features.dim())
    }

    /// Checks every record against an oracle's declared dimension and class
    /// count, reporting the offending source line.
    pub fn validate_for(&self, dim: usize, classes: usize) -> Result<(), DatasetError> {
        for (record, line) in self.records.iter().zip(&self.lines) {
            if record.features.dim() != dim {
                return Err(DatasetError::DimensionMismatch {
                    line: *line,
                    expected: dim,
                    got: record.features.dim(),
                });
            }
            if record.label.0 >= classes {
                return Err(DatasetError::LabelRange {
                    line: *line,
                    label: record.label.0,
                    classes,
                });
            }
        }
        Ok(())
    }
}

/// Loads a CSV dataset. An empty file yields an empty dataset, not an error;
/// callers decide whether that is worth a warning.
pub fn load_dataset(path: impl AsRef<Path>, skip_header: bool) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text, skip_header)
}

/// Parses CSV text; line numbers in errors are 1-based over the raw input.
pub fn parse_dataset(text: &str, skip_header: bool) -> Result<Dataset, DatasetError> {
    let mut dataset = Dataset::default();
    let mut expected_features: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if skip_header && idx == 0 {
            continue;
        }
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split(',');
        let label_tok = fields.next().unwrap().trim();
        let label: usize = label_tok.parse().map_err(|_| DatasetError::Parse {
            line,
            column: 1,
            token: label_tok.to_string(),
            expected: "integer label",
        })?;
        let mut features = Vec::new();
        for (col, tok) in fields.enumerate() {
            let tok = tok.trim();
            let value: f64 = tok.parse().map_err(|_| DatasetError::Parse {
                line,
                column: col + 2,
                token: tok.to_string(),
                expected: "decimal feature",
            })?;
            if !value.is_finite() {
                return Err(DatasetError::Parse {
                    line,
                    column: col + 2,
                    token: tok.to_string(),
                    expected: "finite feature",
                });
            }
            features.push(value);
        }
        if features.is_empty() {
            return Err(DatasetError::NoFeatures { line });
        }
        match expected_features {
            None => expected_features = Some(features.len()),
            Some(expected) if expected != features.len() => {
                return Err(DatasetError::Ragged {
                    line,
                    expected,
                    got: features.len(),
                });
            }
            _ => {}
        }
        dataset.records.push(DatasetRecord {
            features: FeatureVector::new(features).expect("validated finite and non-empty"),
            label: Label(label),
        });
        dataset.lines.push(line);
    }
    Ok(dataset)
}
