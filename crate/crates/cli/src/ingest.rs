//! CSV ingestion and reproducible train/validation/test splits.

use std::path::Path;

use rand::seq::SliceRandom;
use simshap::data::FeatureMatrix;
use simshap::sampling::rng_from_seed;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub features: FeatureMatrix,
    pub labels: Vec<f64>,
}

/// Reads a headed CSV of numeric columns; `label_col` names the target.
pub fn ingest_csv(path: &Path, label_col: &str) -> Result<Dataset, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_csv(&text, label_col).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_csv(text: &str, label_col: &str) -> Result<Dataset, CliError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::Input(format!("unreadable header: {e}")))?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].trim().is_empty()) {
        return Err(CliError::Input("file is empty".into()));
    }
    let names: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = names
        .iter()
        .position(|n| n == label_col)
        .ok_or_else(|| CliError::Input(format!("label column {label_col:?} not in header {names:?}")))?;
    if names.len() < 2 {
        return Err(CliError::Input("need at least one feature column besides the label".into()));
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { pos, expected_len, len } => CliError::Input(format!(
                "line {}: expected {expected_len} fields, found {len}",
                pos.as_ref().map_or(row_idx as u64 + 2, |p| p.line())
            )),
            _ => CliError::Input(format!("row {}: {e}", row_idx + 1)),
        })?;
        let line = record.position().map_or(row_idx as u64 + 2, |p| p.line());
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| {
                CliError::Input(format!(
                    "line {line}, column {:?}: non-numeric value {cell:?}",
                    names[col]
                ))
            })?;
            if !value.is_finite() {
                return Err(CliError::Input(format!(
                    "line {line}, column {:?}: value {cell:?} is not finite",
                    names[col]
                )));
            }
            if col == label_idx {
                labels.push(value);
            } else {
                data.push(value);
            }
        }
    }
    if labels.is_empty() {
        return Err(CliError::Input("file has a header but no data rows".into()));
    }
    let feature_names: Vec<String> = names
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, n)| n.clone())
        .collect();
    let features = FeatureMatrix::from_vec(labels.len(), feature_names.len(), data)?;
    Ok(Dataset {
        feature_names,
        features,
        labels,
    })
}

/// Row indices of a shuffled 70/20/10 train/validation/test partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_rows(n: usize, seed: u64) -> Result<Split, CliError> {
    if n < 3 {
        return Err(CliError::Input(format!("need at least 3 rows to split, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let n_test = ((n as f64 * 0.1).round() as usize).max(1);
    let n_val = ((n as f64 * 0.2).round() as usize).max(1).min(n - n_test - 1);
    let test = order[..n_test].to_vec();
    let validation = order[n_test..n_test + n_val].to_vec();
    let train = order[n_test + n_val..].to_vec();
    Ok(Split {
        train,
        validation,
        test,
    })
}
