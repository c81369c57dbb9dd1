//! Plain CSV export/import of datasets: a header row `x1,...,xd,label`
//! followed by one row per sample, reals written with 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::{Error, Result};

pub fn write_dataset_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let header: Vec<String> = (1..=ds.d()).map(|j| format!("x{j}")).chain(["label".to_string()]).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for (row, y) in ds.features.rows().into_iter().zip(&ds.labels) {
        for v in row {
            let _ = write!(out, "{v:.16e},");
        }
        let _ = writeln!(out, "{y}");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a dataset written by [`write_dataset_csv`]. Labels drawn only from
/// {-1, +1} give a binary dataset; otherwise `k` is one more than the
/// largest label.
pub fn read_dataset_csv(path: impl AsRef<Path>, low_var_dims: Vec<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::parse("csv header", "file is empty"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 2 || cols.last() != Some(&"label") {
        return Err(Error::parse("csv header", format!("expected feature columns followed by `label`, got `{header}`")));
    }
    let d = cols.len() - 1;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d + 1 {
            return Err(Error::parse(format!("csv row {}", lineno + 1), format!("expected {} fields, found {}", d + 1, fields.len())));
        }
        for f in &fields[..d] {
            values.push(f.parse::<f64>().map_err(|e| Error::parse(format!("csv row {}", lineno + 1), format!("`{f}`: {e}")))?);
        }
        labels.push(
            fields[d]
                .parse::<i64>()
                .map_err(|e| Error::parse(format!("csv row {}", lineno + 1), format!("label `{}`: {e}", fields[d])))?,
        );
    }
    let n = labels.len();
    let features = Array2::from_shape_vec((n, d), values).map_err(|e| Error::Shape(e.to_string()))?;
    let binary = labels.iter().all(|&y| y == -1 || y == 1);
    let k = if binary { 2 } else { labels.iter().copied().max().unwrap_or(0).max(1) as usize + 1 };
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Dataset::new(features, labels, k, low_var_dims, name)
}
