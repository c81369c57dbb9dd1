//! Small dense solvers for the systems that appear in the exact solvers
//! (active-set Gram matrices, Newton steps). Dimensions are at most a few
//! hundred, so Gaussian elimination with partial pivoting is adequate.

use ndarray::{Array1, Array2, ArrayView1};

/// Solves `a x = b`; `None` when a pivot falls below `1e-14` times the
/// largest entry of `a`.
pub(crate) fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    debug_assert_eq!(a.ncols(), n);
    debug_assert_eq!(b.len(), n);
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    let mut m = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[[i, col]].abs().total_cmp(&m[[j, col]].abs()))?;
        if m[[pivot, col]].abs() <= 1e-14 * scale {
            return None;
        }
        if pivot != col {
            for c in 0..n {
                m.swap([pivot, c], [col, c]);
            }
            x.swap(pivot, col);
        }
        for r in (col + 1)..n {
            let f = m[[r, col]] / m[[col, col]];
            if f != 0.0 {
                for c in col..n {
                    m[[r, c]] -= f * m[[col, c]];
                }
                x[r] -= f * x[col];
            }
        }
    }
    for r in (0..n).rev() {
        let mut s = x[r];
        for c in (r + 1)..n {
            s -= m[[r, c]] * x[c];
        }
        x[r] = s / m[[r, r]];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Distance from `v` to the span of `rows`, via modified Gram-Schmidt.
pub(crate) fn span_residual(rows: &[ArrayView1<f64>], v: ArrayView1<f64>) -> f64 {
    let mut basis: Vec<Array1<f64>> = Vec::new();
    let scale = rows.iter().map(|r| r.dot(r).sqrt()).fold(0.0, f64::max);
    for r in rows {
        let mut u = r.to_owned();
        // Two passes keep the basis orthogonal to working precision.
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&u);
                u.scaled_add(-c, q);
            }
        }
        let norm = u.dot(&u).sqrt();
        if norm > 1e-10 * scale {
            basis.push(u / norm);
        }
    }
    let mut res = v.to_owned();
    for _ in 0..2 {
        for q in &basis {
            let c = q.dot(&res);
            res.scaled_add(-c, q);
        }
    }
    res.dot(&res).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn solves_small_system() {
        let a = array![[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]];
        let x = array![1.0, -2.0, 0.5];
        let b = a.dot(&x);
        let got = solve(&a, &b).unwrap();
        assert!(got.iter().zip(x.iter()).all(|(u, v)| (u - v).abs() < 1e-14));
        assert!(solve(&array![[1.0, 2.0], [2.0, 4.0]], &array![1.0, 1.0]).is_none());
    }

    #[test]
    fn span_residual_of_plane() {
        let rows = [array![1.0, 0.0, 0.0], array![1.0, 1.0, 0.0]];
        let views: Vec<_> = rows.iter().map(|r| r.view()).collect();
        assert!(span_residual(&views, array![3.0, -2.0, 0.0].view()) < 1e-15);
        assert!((span_residual(&views, array![0.0, 0.0, 2.0].view()) - 2.0).abs() < 1e-15);
    }
}
