use std::collections::HashMap;
use std::path::Path;

use super::{Dataset, TargetData, Task};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Result of [`load_csv`]: the dataset and how many rows were skipped.
#[derive(Debug, Clone)]
pub struct CsvLoad {
    pub dataset: Dataset,
    pub dropped_rows: usize,
}

/// Reads a headered, comma-separated numeric table.
///
/// Every column other than `target_column` becomes a feature, in header order.
/// Rows with a missing or unparseable cell are dropped and counted.
/// Classification targets are mapped to `0..C` by order of first appearance.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str, task: Task) -> Result<CsvLoad> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(::csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let target_idx = header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::MissingColumn(target_column.to_owned()))?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut data = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut class_ids: HashMap<String, usize> = HashMap::new();
    let mut rows = 0usize;
    let mut dropped = 0usize;
    let mut row_buf = Vec::with_capacity(feature_names.len());

    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                dropped += 1;
                continue;
            }
        };
        if record.len() != header.len() {
            dropped += 1;
            continue;
        }
        row_buf.clear();
        let mut ok = true;
        for (i, cell) in record.iter().enumerate() {
            if i == target_idx {
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row_buf.push(v),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        let target_cell = &record[target_idx];
        let target_ok = match task {
            Task::Regression => target_cell.parse::<f64>().is_ok_and(f64::is_finite),
            Task::Classification => !target_cell.is_empty(),
        };
        if !ok || !target_ok {
            dropped += 1;
            continue;
        }
        data.extend_from_slice(&row_buf);
        match task {
            Task::Regression => values.push(target_cell.parse::<f64>().expect("checked")),
            Task::Classification => {
                let next = class_ids.len();
                labels.push(*class_ids.entry(target_cell.to_owned()).or_insert(next));
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::NoRows(path.to_path_buf()));
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} malformed row(s)", path.display());
    }
    let features = Matrix::from_vec(rows, feature_names.len(), data)?;
    let targets = match task {
        Task::Regression => TargetData::Values(values),
        Task::Classification => TargetData::Labels {
            labels,
            classes: class_ids.len().max(2),
        },
    };
    let mut dataset = Dataset::new(features, targets)?;
    dataset.feature_names = Some(feature_names);
    Ok(CsvLoad {
        dataset,
        dropped_rows: dropped,
    })
}
