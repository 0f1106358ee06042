//! Loading tabular regression data from CSV.

use std::path::Path;

use anyhow::{bail, Context, Result};
use faer::Mat;
use shrimp_core::Dataset;

/// A numeric table split into features and target.
#[derive(Clone, Debug)]
pub struct Table {
    pub x: Mat<f64>,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
    pub dropped: usize,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim().to_ascii_lowercase().as_str(), "" | "na" | "nan" | "?" | "null")
}

/// Read a headed CSV. Rows with a missing cell are dropped; any other
/// non-numeric cell is an error naming its line.
pub fn load_table(path: &Path, target: &str) -> Result<Table> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let t = match headers.iter().position(|h| h == target) {
        Some(i) => i,
        None => match target.parse::<usize>() {
            Ok(i) if i < headers.len() => i,
            _ => bail!("target column '{target}' not found in {}", path.display()),
        },
    };
    if headers.len() < 2 {
        bail!("{} needs at least one feature column besides the target", path.display());
    }
    let mut rows = Vec::new();
    let mut dropped = 0;
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.with_context(|| format!("{}: line {line}", path.display()))?;
        if record.iter().any(is_missing) {
            dropped += 1;
            continue;
        }
        let vals = record
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                cell.trim().parse::<f64>().with_context(|| {
                    format!("{}: line {line}, column '{}': cannot parse '{cell}'", path.display(), headers[col])
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(vals);
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} rows with missing values from {}", path.display());
    }
    let features: Vec<usize> = (0..headers.len()).filter(|&c| c != t).collect();
    let x = Mat::from_fn(rows.len(), features.len(), |i, j| rows[i][features[j]]);
    let y = rows.iter().map(|r| r[t]).collect();
    Ok(Table { x, y, feature_names: features.iter().map(|&c| headers[c].clone()).collect(), dropped })
}

/// Per-column mean and population standard deviation (constant columns get 1).
pub fn column_stats(x: &Mat<f64>) -> Vec<(f64, f64)> {
    let n = x.nrows() as f64;
    (0..x.ncols())
        .map(|j| {
            let mean = (0..x.nrows()).map(|i| x[(i, j)]).sum::<f64>() / n;
            let var = (0..x.nrows()).map(|i| (x[(i, j)] - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            (mean, if sd > 0.0 { sd } else { 1.0 })
        })
        .collect()
}

pub fn apply_stats(x: &mut Mat<f64>, stats: &[(f64, f64)]) {
    for (j, &(mean, sd)) in stats.iter().enumerate() {
        for i in 0..x.nrows() {
            x[(i, j)] = (x[(i, j)] - mean) / sd;
        }
    }
}

/// Load `path` (and optionally a separate test file), split 90/10 under `seed`,
/// and standardize features with training statistics.
pub fn ingest_csv(
    path: &Path,
    target: &str,
    standardize: bool,
    seed: u64,
    test_path: Option<&Path>,
) -> Result<Dataset> {
    let table = load_table(path, target)?;
    let test = match test_path {
        Some(p) => {
            let t = load_table(p, target)?;
            if t.x.ncols() != table.x.ncols() {
                bail!("test file has {} features, training file has {}", t.x.ncols(), table.x.ncols());
            }
            Some((t.x, t.y))
        }
        None => None,
    };
    let mut ds = Dataset::split(table.x.as_ref(), &table.y, test, seed, 0.0)?;
    if standardize {
        let stats = column_stats(&ds.x_train);
        apply_stats(&mut ds.x_train, &stats);
        apply_stats(&mut ds.x_val, &stats);
        apply_stats(&mut ds.x_test, &stats);
    }
    Ok(ds)
}
