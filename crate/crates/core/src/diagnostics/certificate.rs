use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::losses::{mixup_groups, opt_ls_value, opt_mixup_value, FiniteDistribution, LambdaGrid, MixedGroup};
use crate::train::Model;
use crate::{Error, Result};

/// Numerical tolerance of the certificate inequality.
pub const CERTIFICATE_TOL: f64 = 1e-9;

/// Checked instance of `loss >= OPT + C * variance_term`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub loss_value: f64,
    pub opt_value: f64,
    pub constant_c: f64,
    pub variance_term: f64,
    pub satisfied: bool,
    pub slack: f64,
}

impl Certificate {
    fn new(loss_value: f64, opt_value: f64, constant_c: f64, variance_term: f64) -> Self {
        let slack = loss_value - opt_value - constant_c * variance_term;
        Certificate {
            loss_value,
            opt_value,
            constant_c,
            variance_term,
            satisfied: slack >= -CERTIFICATE_TOL,
            slack,
        }
    }
}

/// Anything that maps inputs to class-probability rows.
pub trait Predictor {
    fn probabilities(&self, x: ArrayView2<f64>) -> Result<Array2<f64>>;
}

impl Predictor for Model {
    fn probabilities(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.predict_proba(x)
    }
}

/// Predicts the mean Mixup target of the mixed point it is queried at; the
/// minimiser of the population Mixup loss on the support it was built from.
#[derive(Debug, Clone)]
pub struct GroupOptimalPredictor {
    groups: Vec<MixedGroup>,
    /// Group indices sorted by first coordinate.
    order: Vec<usize>,
}

impl GroupOptimalPredictor {
    pub fn new(pi: &FiniteDistribution, grid: &LambdaGrid) -> Result<Self> {
        let groups = mixup_groups(pi, grid)?;
        let mut order: Vec<usize> = (0..groups.len()).collect();
        order.sort_by(|&a, &b| groups[a].point[0].total_cmp(&groups[b].point[0]));
        Ok(GroupOptimalPredictor { groups, order })
    }

    fn lookup(&self, z: &[f64]) -> Option<&MixedGroup> {
        let tol = 1e-9;
        let start = self.order.partition_point(|&g| self.groups[g].point[0] < z[0] - tol);
        self.order[start..]
            .iter()
            .map(|&g| &self.groups[g])
            .take_while(|g| g.point[0] <= z[0] + tol)
            .find(|g| g.point.iter().zip(z).all(|(a, b)| (a - b).abs() <= tol))
    }
}

impl Predictor for GroupOptimalPredictor {
    fn probabilities(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let k = self.groups.first().map_or(0, |g| g.target.len());
        let mut out = Array2::zeros((x.nrows(), k));
        for (i, row) in x.rows().into_iter().enumerate() {
            let z = row.to_vec();
            let g = self
                .lookup(&z)
                .ok_or_else(|| Error::config(format!("query point {i} is not a mixed support point")))?;
            out.row_mut(i).assign(&ndarray::ArrayView1::from(&g.target));
        }
        Ok(out)
    }
}

fn check_rows(g: &ArrayView2<f64>, k: usize) -> Result<()> {
    if g.ncols() != k {
        return Err(Error::Shape(format!("predictions have {} columns, expected {k}", g.ncols())));
    }
    for (i, row) in g.rows().into_iter().enumerate() {
        let s = row.sum();
        if (s - 1.0).abs() > 1e-9 || row.iter().any(|&p| !(0.0..=1.0 + 1e-9).contains(&p)) {
            return Err(Error::Numeric(format!("prediction row {i} is off the simplex (sum {s})")));
        }
    }
    Ok(())
}

/// `-sum_c t_c ln q_c`, skipping zero targets.
fn cross_entropy(t: &[f64], q: ndarray::ArrayView1<f64>) -> f64 {
    t.iter().zip(q).filter(|(t, _)| **t != 0.0).map(|(t, q)| -t * q.ln()).sum()
}

/// Lower-bound certificate for the label-smoothing loss of a predictor given
/// by its outputs on the support of `pi`. Uses `C = alpha / (2k)`: every
/// smoothed-target coordinate is at least `alpha/k`, so the conditional loss
/// has curvature at least `alpha/k` on the simplex.
pub fn ls_lower_bound_certificate(g_outputs: ArrayView2<f64>, pi: &FiniteDistribution, alpha: f64, k: usize) -> Result<Certificate> {
    if g_outputs.nrows() != pi.m() {
        return Err(Error::Shape(format!("{} prediction rows for {} support points", g_outputs.nrows(), pi.m())));
    }
    check_rows(&g_outputs, k)?;
    let opt = opt_ls_value(pi, alpha, k)?;
    let classes = pi.class_indices();
    let masses = pi.class_masses();
    let mut target = vec![0.0; k];
    let mut loss = 0.0;
    for (i, &c) in classes.iter().enumerate() {
        crate::losses::smoothed_target(c, k, alpha, &mut target);
        loss += pi.probs[i] * cross_entropy(&target, g_outputs.row(i));
    }
    let mut means = Array2::<f64>::zeros((k, k));
    for (i, &c) in classes.iter().enumerate() {
        means.row_mut(c).scaled_add(pi.probs[i] / masses[c], &g_outputs.row(i));
    }
    // sum_y pi_Y(y) Tr Cov(g | y) = sum_i p_i |g_i - mean_{y_i}|^2.
    let variance: f64 = classes
        .iter()
        .enumerate()
        .map(|(i, &c)| pi.probs[i] * (&g_outputs.row(i) - &means.row(c)).mapv(|v| v * v).sum())
        .sum();
    Ok(Certificate::new(loss, opt, alpha / (2.0 * k as f64), variance))
}

/// Lower-bound certificate for the Mixup loss of `model` under `pi` and the
/// lambda quadrature. `C` is the smallest `min(lambda, 1 - lambda)` on the
/// grid divided by `2k`; the variance term is taken within each
/// `(y1, y2, lambda)` group.
pub fn mixup_lower_bound_certificate<P: Predictor + ?Sized>(model: &P, pi: &FiniteDistribution, grid: &LambdaGrid) -> Result<Certificate> {
    grid.validate()?;
    if let Some((l, _)) = grid.iter().find(|(l, w)| *w > 0.0 && (*l == 0.0 || *l == 1.0)) {
        return Err(Error::config(format!("lambda grid puts weight on the endpoint {l}")));
    }
    let k = pi.k;
    let classes = pi.class_indices();
    let (m, d) = (pi.m(), pi.d());
    let nodes: Vec<(usize, f64, f64)> = grid.iter().enumerate().filter(|(_, (_, w))| *w > 0.0).map(|(i, (l, w))| (i, l, w)).collect();

    struct Entry {
        mass: f64,
        c1: usize,
        c2: usize,
        lambda: f64,
        group: usize,
    }
    let mut entries = Vec::with_capacity(m * m * nodes.len());
    let mut points = Vec::with_capacity(m * m * nodes.len() * d);
    for i in 0..m {
        for j in 0..m {
            for &(node, lambda, weight) in &nodes {
                let mass = pi.probs[i] * pi.probs[j] * weight;
                if mass == 0.0 {
                    continue;
                }
                points.extend((0..d).map(|c| lambda * pi.points[[i, c]] + (1.0 - lambda) * pi.points[[j, c]]));
                let group = (classes[i] * k + classes[j]) * grid.nodes.len() + node;
                entries.push(Entry {
                    mass,
                    c1: classes[i],
                    c2: classes[j],
                    lambda,
                    group,
                });
            }
        }
    }
    let z = Array2::from_shape_vec((entries.len(), d), points).map_err(|e| Error::Shape(e.to_string()))?;
    let g = model.probabilities(z.view())?;
    check_rows(&g.view(), k)?;

    let groups = k * k * grid.nodes.len();
    let mut group_mass = vec![0.0; groups];
    let mut group_mean = Array2::<f64>::zeros((groups, k));
    let mut loss = 0.0;
    for (e, row) in entries.iter().zip(g.rows()) {
        loss -= e.mass * (e.lambda * row[e.c1].ln() + (1.0 - e.lambda) * row[e.c2].ln());
        group_mass[e.group] += e.mass;
        group_mean.row_mut(e.group).scaled_add(e.mass, &row);
    }
    for (mut mean, &mass) in group_mean.rows_mut().into_iter().zip(&group_mass) {
        if mass > 0.0 {
            mean /= mass;
        }
    }
    let variance: f64 = entries
        .iter()
        .zip(g.rows())
        .map(|(e, row)| e.mass * (&row - &group_mean.row(e.group)).mapv(|v| v * v).sum())
        .sum();
    let c = nodes.iter().map(|&(_, l, _)| l.min(1.0 - l)).fold(f64::INFINITY, f64::min) / (2.0 * k as f64);
    let opt = opt_mixup_value(pi, grid)?;
    Ok(Certificate::new(loss, opt, c, variance))
}
