use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};

struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn data_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Data {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_table(path: &Path, header: bool) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| data_error(path, csv_message(e)))?;

    let mut columns: Vec<String> = if header {
        reader
            .headers()
            .map_err(|e| data_error(path, csv_message(e)))?
            .iter()
            .map(str::to_string)
            .collect()
    } else {
        Vec::new()
    };

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(|e| data_error(path, format!("row {row_no}: {}", csv_message(e))))?;
        if columns.is_empty() {
            columns = (0..record.len()).map(|c| c.to_string()).collect();
        }
        let mut values = Vec::with_capacity(record.len());
        for (c, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                data_error(
                    path,
                    format!("row {row_no}, column {}: {cell:?} is not a number", columns[c]),
                )
            })?;
            if !value.is_finite() {
                return Err(data_error(
                    path,
                    format!("row {row_no}, column {}: non-finite value {cell:?}", columns[c]),
                ));
            }
            values.push(value);
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(data_error(path, "no data rows"));
    }
    Ok(Table { columns, rows })
}

fn csv_message(e: csv::Error) -> String {
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("ragged row: expected {expected_len} fields, found {len}")
        }
        _ => e.to_string(),
    }
}

fn resolve_target(table: &Table, target: &str, header: bool, path: &Path) -> Result<usize> {
    if header {
        if let Some(i) = table.columns.iter().position(|c| c == target) {
            return Ok(i);
        }
    }
    match target.parse::<usize>() {
        Ok(i) if i < table.columns.len() => Ok(i),
        _ => Err(data_error(
            path,
            format!(
                "target column {target:?} not found; available columns: {}",
                table.columns.join(", ")
            ),
        )),
    }
}

/// Reads a numeric CSV file. `target` names the target column, or gives its
/// zero-based index. Without a header, features are named by column index.
pub fn load_csv(path: impl AsRef<Path>, target: &str, header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let table = read_table(path, header)?;
    let t = resolve_target(&table, target, header, path)?;
    if table.columns.len() < 2 {
        return Err(data_error(path, "need at least one feature column besides the target"));
    }

    let n_features = table.columns.len() - 1;
    let mut features = Vec::with_capacity(table.rows.len() * n_features);
    let mut targets = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        for (c, v) in row.iter().enumerate() {
            if c == t {
                targets.push(*v);
            } else {
                features.push(*v);
            }
        }
    }
    if targets.iter().all(|y| *y == targets[0]) {
        return Err(data_error(
            path,
            format!("target column {} is constant", table.columns[t]),
        ));
    }

    let feature_names = table
        .columns
        .iter()
        .enumerate()
        .filter(|(c, _)| *c != t)
        .map(|(_, name)| name.clone())
        .collect();
    Dataset::from_flat(features, n_features, targets)
        .and_then(|d| d.with_names(feature_names, table.columns[t].clone()))
        .map_err(|e| data_error(path, e.to_string()))
}

fn pick_by_name(table: &Table, names: &[String], path: &Path) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|name| {
            table.columns.iter().position(|c| c == name).ok_or_else(|| {
                data_error(
                    path,
                    format!(
                        "column {name:?} not found; available columns: {}",
                        table.columns.join(", ")
                    ),
                )
            })
        })
        .collect()
}

/// Reads the feature columns a model was trained on.
///
/// With a header, columns are picked by name and any other column (such as the
/// target) is ignored. Without one the file must hold exactly the features, in
/// training order.
pub fn load_features(path: impl AsRef<Path>, header: bool, feature_names: &[String]) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let table = read_table(path, header)?;
    let picks: Vec<usize> = if header {
        pick_by_name(&table, feature_names, path)?
    } else if table.columns.len() == feature_names.len() {
        (0..feature_names.len()).collect()
    } else {
        return Err(data_error(
            path,
            format!(
                "expected {} feature columns, found {}",
                feature_names.len(),
                table.columns.len()
            ),
        ));
    };
    Ok(table
        .rows
        .iter()
        .map(|row| picks.iter().map(|&c| row[c]).collect())
        .collect())
}

/// Reads a labelled evaluation file for a trained model: features in the
/// model's order plus the target. With a header, columns are found by name.
/// Without one, the target is found by index (`target` must then be one, as
/// it is for models trained on header-less files) and the remaining columns
/// are taken in order. Unlike `load_csv`, a constant target is accepted.
pub fn load_labeled(path: impl AsRef<Path>, header: bool, feature_names: &[String], target: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let table = read_table(path, header)?;
    let t = resolve_target(&table, target, header, path)?;
    let picks: Vec<usize> = if header {
        pick_by_name(&table, feature_names, path)?
    } else {
        (0..table.columns.len()).filter(|&c| c != t).collect()
    };
    if picks.len() != feature_names.len() {
        return Err(data_error(
            path,
            format!(
                "expected {} feature columns, found {}",
                feature_names.len(),
                picks.len()
            ),
        ));
    }
    let features = table
        .rows
        .iter()
        .flat_map(|row| picks.iter().map(|&c| row[c]))
        .collect();
    let targets = table.rows.iter().map(|row| row[t]).collect();
    Dataset::from_flat(features, picks.len(), targets)
        .and_then(|d| d.with_names(feature_names.to_vec(), table.columns[t].clone()))
        .map_err(|e| data_error(path, e.to_string()))
}
