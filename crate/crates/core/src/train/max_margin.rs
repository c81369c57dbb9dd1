//! Hard-margin solver: `min |w|^2` subject to `y_i <w, x_i> >= 1`.
//!
//! With `a_i = y_i x_i`, the dual is the minimum-norm point `u*` of the convex
//! hull of the `a_i`, and `w* = u* / |u*|^2`. The hull is searched with
//! Wolfe's corral algorithm, which is finite and exact up to rounding; the
//! result is polished by a least-norm solve on the binding rows. A hull that
//! contains the origin certifies that no separator exists.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::linalg::{solve, span_residual};
use crate::{Error, Result};

pub const DEFAULT_MARGIN_TOL: f64 = 1e-6;

/// Convex weights below this are dropped from the corral.
const WEIGHT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxMarginSolution {
    pub w: Vec<f64>,
    /// Rows whose margin is within `tol` of 1.
    pub active: Vec<usize>,
    pub min_margin: f64,
    /// Distance from `w` to the span of the active rows.
    pub kkt_residual: f64,
}

impl MaxMarginSolution {
    pub fn norm_sq(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum()
    }
}

fn combine(a: &Array2<f64>, corral: &[usize], weights: &[f64]) -> Array1<f64> {
    let mut x = Array1::zeros(a.ncols());
    for (&i, &l) in corral.iter().zip(weights) {
        x.scaled_add(l, &a.row(i));
    }
    x
}

/// Affine minimiser of `|sum mu_s a_s|` with `sum mu_s = 1`.
fn affine_min(a: &Array2<f64>, corral: &[usize]) -> Option<Vec<f64>> {
    let m = corral.len();
    let mut sys = Array2::zeros((m + 1, m + 1));
    for (r, &i) in corral.iter().enumerate() {
        for (c, &j) in corral.iter().enumerate() {
            sys[[r, c]] = a.row(i).dot(&a.row(j));
        }
        sys[[r, m]] = 1.0;
        sys[[m, r]] = 1.0;
    }
    let mut rhs = Array1::zeros(m + 1);
    rhs[m] = 1.0;
    solve(&sys, &rhs).map(|s| s.iter().take(m).copied().collect())
}

struct HullPoint {
    corral: Vec<usize>,
    x: Array1<f64>,
}

fn min_norm_point(a: &Array2<f64>) -> HullPoint {
    let n = a.nrows();
    let sq: Vec<f64> = a.rows().into_iter().map(|r| r.dot(&r)).collect();
    let scale = sq.iter().fold(0.0f64, |m, &v| m.max(v));
    let start = (0..n).min_by(|&i, &j| sq[i].total_cmp(&sq[j])).expect("non-empty");
    let mut corral = vec![start];
    let mut weights: Vec<f64> = vec![1.0];
    let mut x = a.row(start).to_owned();
    for _ in 0..(50 * n + 1000) {
        let xx = x.dot(&x);
        if xx <= 1e-24 * scale {
            break;
        }
        let proj = a.dot(&x);
        let (j, pj) = proj.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(j, &p)| (j, p)).expect("non-empty");
        if xx - pj <= 1e-15 * scale || corral.contains(&j) {
            break;
        }
        corral.push(j);
        weights.push(0.0);
        loop {
            let Some(mu) = affine_min(a, &corral) else {
                // Affinely dependent corral: drop the lightest older point.
                let drop = (0..corral.len() - 1).min_by(|&p, &q| weights[p].total_cmp(&weights[q])).unwrap_or(0);
                corral.remove(drop);
                weights.remove(drop);
                let total: f64 = weights.iter().sum();
                if total > 0.0 {
                    weights.iter_mut().for_each(|w| *w /= total);
                } else {
                    let last = weights.len() - 1;
                    weights[last] = 1.0;
                }
                continue;
            };
            if mu.iter().all(|&m| m > WEIGHT_FLOOR) {
                weights = mu;
                break;
            }
            // Move from the current weights toward mu until one hits zero.
            let theta = weights
                .iter()
                .zip(&mu)
                .filter(|(_, &m)| m <= WEIGHT_FLOOR)
                .map(|(&l, &m)| l / (l - m))
                .fold(1.0f64, f64::min);
            for (l, m) in weights.iter_mut().zip(&mu) {
                *l = (1.0 - theta) * *l + theta * m;
            }
            let keep: Vec<bool> = weights.iter().map(|&l| l > WEIGHT_FLOOR).collect();
            if keep.iter().all(|&k| k) {
                let p = (0..weights.len()).min_by(|&p, &q| weights[p].total_cmp(&weights[q])).unwrap_or(0);
                corral.remove(p);
                weights.remove(p);
            } else {
                let mut idx = 0;
                corral.retain(|_| {
                    idx += 1;
                    keep[idx - 1]
                });
                weights.retain(|&l| l > WEIGHT_FLOOR);
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
        }
        x = combine(a, &corral, &weights);
    }
    HullPoint { corral, x }
}

/// Least-norm `w` with `<a_s, w> = 1` on `rows`.
fn least_norm_on(a: &Array2<f64>, rows: &[usize]) -> Option<Array1<f64>> {
    let m = rows.len();
    let gram = Array2::from_shape_fn((m, m), |(r, c)| a.row(rows[r]).dot(&a.row(rows[c])));
    let coef = solve(&gram, &Array1::ones(m))?;
    Some(combine(a, rows, coef.as_slice().expect("contiguous")))
}

fn margins(a: &Array2<f64>, w: &Array1<f64>) -> Array1<f64> {
    a.dot(w)
}

/// Minimum-norm `w` with `y_i <w, x_i> >= 1 - tol` on every row.
pub fn max_margin_solve(ds: &Dataset, tol: f64) -> Result<MaxMarginSolution> {
    ds.require_binary("max-margin solving")?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::config(format!("margin tolerance must be in (0, 1), got {tol}")));
    }
    let mut a = ds.features.clone();
    for (mut row, &y) in a.rows_mut().into_iter().zip(&ds.labels) {
        row *= y as f64;
    }
    let hull = min_norm_point(&a);
    let xx = hull.x.dot(&hull.x);
    let scale = a.rows().into_iter().map(|r| r.dot(&r)).fold(0.0f64, f64::max);
    let min_proj = margins(&a, &hull.x).fold(f64::INFINITY, |m, &v| m.min(v));
    if xx <= 1e-20 * scale || min_proj <= 0.0 {
        return Err(Error::Infeasible(format!(
            "labels are not linearly separable through the origin: a convex combination of {} signed rows has norm {:.3e} (rows {:?})",
            hull.corral.len(),
            xx.sqrt(),
            &hull.corral[..hull.corral.len().min(8)],
        )));
    }
    let mut w = &hull.x / xx;

    // Polish on the corral, which holds the binding rows at the optimum.
    if let Some(p) = least_norm_on(&a, &hull.corral) {
        let feasible = margins(&a, &p).iter().all(|&m| m >= 1.0 - 1e-12);
        if feasible && p.dot(&p) <= w.dot(&w) * (1.0 + 1e-9) {
            w = p;
        }
    }
    let mut m = margins(&a, &w);
    let min_margin = m.fold(f64::INFINITY, |acc, &v| acc.min(v));
    if min_margin < 1.0 - tol {
        // Rounding left a constraint short; rescaling restores feasibility.
        w /= min_margin;
        m = margins(&a, &w);
    }
    let min_margin = m.fold(f64::INFINITY, |acc, &v| acc.min(v));
    let active: Vec<usize> = (0..ds.n()).filter(|&i| m[i] <= 1.0 + tol).collect();
    let rows: Vec<ArrayView1<f64>> = active.iter().map(|&i| a.row(i)).collect();
    let kkt_residual = span_residual(&rows, w.view());
    let wn = w.dot(&w).sqrt();
    if kkt_residual > 1e-6 * wn {
        return Err(Error::Numeric(format!(
            "max-margin KKT audit failed: w is {kkt_residual:.3e} from the span of {} active rows (|w| = {wn:.3e})",
            active.len()
        )));
    }
    Ok(MaxMarginSolution {
        w: w.to_vec(),
        active,
        min_margin,
        kkt_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ds(x: Array2<f64>, y: Vec<i64>) -> Dataset {
        Dataset::new(x, y, 2, vec![], "t").unwrap()
    }

    #[test]
    fn one_dimensional() {
        let s = max_margin_solve(&ds(array![[1.0], [-1.0]], vec![1, -1]), DEFAULT_MARGIN_TOL).unwrap();
        assert!((s.w[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_binding_point() {
        let x = array![[1.0, 0.1], [3.0, 0.1], [-1.0, -0.1], [-4.0, -0.1]];
        let s = max_margin_solve(&ds(x, vec![1, 1, -1, -1]), DEFAULT_MARGIN_TOL).unwrap();
        assert!((s.w[0] - 1.0 / 1.01).abs() < 1e-12 && (s.w[1] - 0.1 / 1.01).abs() < 1e-12);
        assert!((s.norm_sq() - 1.0 / 1.01).abs() < 1e-12);
        assert_eq!(s.active, vec![0, 2]);
    }

    #[test]
    fn two_binding_points() {
        // Binding rows (1, 0) and (0, 1) give w = (1, 1).
        let x = array![[1.0, 0.0], [0.0, -1.0], [2.0, 3.0]];
        let s = max_margin_solve(&ds(x, vec![1, -1, 1]), DEFAULT_MARGIN_TOL).unwrap();
        assert!((s.w[0] - 1.0).abs() < 1e-12 && (s.w[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlapping_classes_are_infeasible() {
        let x = array![[1.0, 0.0], [2.0, 0.0], [1.5, 0.0]];
        let err = max_margin_solve(&ds(x, vec![1, 1, -1]), DEFAULT_MARGIN_TOL).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn multiclass_is_rejected() {
        let d = Dataset::new(array![[1.0], [2.0], [3.0]], vec![0, 1, 2], 3, vec![], "t").unwrap();
        assert!(max_margin_solve(&d, DEFAULT_MARGIN_TOL).is_err());
    }
}
