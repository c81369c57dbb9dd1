use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Class-averaged total variance of a set of vectors (activations or output
/// probabilities). All covariances use the `1/n` normaliser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    /// Mean over classes of `Tr(Cov(v | class))`.
    pub per_class_total_variance: f64,
    /// Mean over classes of the variance of the target-class probability;
    /// present only when the vectors are probabilities.
    pub target_output_variance: Option<f64>,
    pub per_class_breakdown: Vec<f64>,
}

fn class_rows(classes: &[usize], k: usize, n: usize) -> Result<Vec<Vec<usize>>> {
    if classes.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} rows", classes.len())));
    }
    let mut rows = vec![Vec::new(); k];
    for (i, &c) in classes.iter().enumerate() {
        if c >= k {
            return Err(Error::config(format!("class {c} outside [0, {k})")));
        }
        rows[c].push(i);
    }
    if let Some(c) = rows.iter().position(Vec::is_empty) {
        return Err(Error::config(format!("class {c} has no samples")));
    }
    Ok(rows)
}

/// Trace of the population covariance of the selected rows, computed in two
/// passes (mean first) for accuracy.
fn total_variance(v: &ArrayView2<f64>, rows: &[usize]) -> f64 {
    let n = rows.len() as f64;
    let p = v.ncols();
    let mut mean = vec![0.0; p];
    for &r in rows {
        for (m, x) in mean.iter_mut().zip(v.row(r)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut total = 0.0;
    for &r in rows {
        for (m, x) in mean.iter().zip(v.row(r)) {
            total += (x - m) * (x - m);
        }
    }
    total / n
}

pub fn per_class_total_variance(vectors: ArrayView2<f64>, classes: &[usize], k: usize) -> Result<VarianceReport> {
    let rows = class_rows(classes, k, vectors.nrows())?;
    let breakdown: Vec<f64> = rows.iter().map(|r| total_variance(&vectors, r)).collect();
    Ok(VarianceReport {
        per_class_total_variance: breakdown.iter().sum::<f64>() / k as f64,
        target_output_variance: None,
        per_class_breakdown: breakdown,
    })
}

fn check_simplex(probs: &ArrayView2<f64>) -> Result<()> {
    for (i, row) in probs.rows().into_iter().enumerate() {
        let s: f64 = row.sum();
        if (s - 1.0).abs() > 1e-9 || row.iter().any(|&p| !(-1e-9..=1.0 + 1e-9).contains(&p)) {
            return Err(Error::Numeric(format!("row {i} is not a probability vector (sum {s})")));
        }
    }
    Ok(())
}

/// Mean over classes `y` of the variance of `probs[., y]` over rows labelled
/// `y`.
pub fn target_class_output_variance(probs: ArrayView2<f64>, classes: &[usize]) -> Result<f64> {
    check_simplex(&probs)?;
    let k = probs.ncols();
    let rows = class_rows(classes, k, probs.nrows())?;
    let col = |c: usize| probs.column(c);
    let total: f64 = rows
        .iter()
        .enumerate()
        .map(|(c, r)| {
            let n = r.len() as f64;
            let mean = r.iter().map(|&i| col(c)[i]).sum::<f64>() / n;
            r.iter().map(|&i| (col(c)[i] - mean).powi(2)).sum::<f64>() / n
        })
        .sum();
    Ok(total / k as f64)
}

/// Both output-variance metrics for a probability matrix.
pub fn output_variance_report(probs: ArrayView2<f64>, classes: &[usize]) -> Result<VarianceReport> {
    let target = target_class_output_variance(probs, classes)?;
    let mut report = per_class_total_variance(probs, classes, probs.ncols())?;
    report.target_output_variance = Some(target);
    Ok(report)
}
