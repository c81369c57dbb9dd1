use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};

use super::{binary_soft_ce, sigmoid, xlogx, LambdaGrid, LossKind, LossSpec};
use crate::datagen::{label_to_class, Dataset};
use crate::{Error, Result};

/// Coordinates closer than this (in every dimension) count as one mixed point.
const COINCIDENCE_TOL: f64 = 1e-12;

/// Joint distribution of (X, Y) with finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    pub points: Array2<f64>,
    pub labels: Vec<i64>,
    pub probs: Vec<f64>,
    pub k: usize,
}

impl FiniteDistribution {
    /// Labels follow the [`Dataset`] convention: {-1, +1} for binary, `0..k`
    /// otherwise.
    pub fn new(points: Array2<f64>, labels: Vec<i64>, probs: Vec<f64>, k: usize) -> Result<Self> {
        let m = points.nrows();
        if m == 0 || points.ncols() == 0 {
            return Err(Error::config("finite distribution needs at least one support point"));
        }
        if labels.len() != m || probs.len() != m {
            return Err(Error::Shape(format!("{m} points, {} labels, {} probabilities", labels.len(), probs.len())));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("support points must be finite"));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
            return Err(Error::config(format!("probability {p} is negative or non-finite")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("probabilities sum to {total}, not 1")));
        }
        let pi = FiniteDistribution { points, labels, probs, k };
        // Label range checks are shared with Dataset.
        Dataset::new(pi.points.clone(), pi.labels.clone(), k, vec![], "pi")?;
        if let Some(c) = pi.class_masses().iter().position(|&m| m <= 0.0) {
            return Err(Error::config(format!("class {c} has zero probability mass")));
        }
        Ok(pi)
    }

    /// Empirical distribution: probability `1/n` on every row.
    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        let n = ds.n();
        Self::new(ds.features.clone(), ds.labels.clone(), vec![1.0 / n as f64; n], ds.k)
    }

    /// Reads CSV rows `x1,...,xd,label,probability` (header required).
    pub fn from_csv(path: impl AsRef<Path>, k: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::parse("distribution header", "file is empty"))?;
        let cols = header.split(',').count();
        if cols < 3 {
            return Err(Error::parse("distribution header", format!("need features, label and probability, got `{header}`")));
        }
        let d = cols - 2;
        let (mut values, mut labels, mut probs) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines.enumerate() {
            let field = format!("distribution row {}", i + 1);
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != cols {
                return Err(Error::parse(field, format!("expected {cols} fields, found {}", parts.len())));
            }
            for p in &parts[..d] {
                values.push(p.parse::<f64>().map_err(|e| Error::parse(&field, format!("`{p}`: {e}")))?);
            }
            labels.push(parts[d].parse::<i64>().map_err(|e| Error::parse(&field, format!("label: {e}")))?);
            probs.push(parts[d + 1].parse::<f64>().map_err(|e| Error::parse(&field, format!("probability: {e}")))?);
        }
        let m = labels.len();
        let points = Array2::from_shape_vec((m, d), values).map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(points, labels, probs, k)
    }

    pub fn m(&self) -> usize {
        self.points.nrows()
    }

    pub fn d(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_binary(&self) -> bool {
        self.k == 2 && self.labels.iter().all(|&y| y == -1 || y == 1)
    }

    pub fn class_indices(&self) -> Vec<usize> {
        let binary = self.is_binary();
        self.labels.iter().map(|&y| label_to_class(y, binary)).collect()
    }

    /// `pi_Y(c)` for every class index.
    pub fn class_masses(&self) -> Vec<f64> {
        let mut masses = vec![0.0; self.k];
        for (c, p) in self.class_indices().into_iter().zip(&self.probs) {
            masses[c] += p;
        }
        masses
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }
}

fn grid_for(spec: &LossSpec, grid: Option<&LambdaGrid>) -> Result<Option<LambdaGrid>> {
    match (&spec.kind, grid) {
        (LossKind::Mixup { .. }, Some(g)) => {
            g.validate()?;
            Ok(Some(g.clone()))
        }
        (LossKind::Mixup { mixing }, None) => Ok(Some(LambdaGrid::for_distribution(mixing)?)),
        _ => Ok(None),
    }
}

/// Exact expected loss of the linear binary predictor `sigmoid(w.x)` under
/// `pi`. Mixup integrates over all ordered support pairs and the grid (the
/// spec's mixing distribution is discretised when no grid is supplied).
pub fn population_loss(w: &[f64], pi: &FiniteDistribution, spec: &LossSpec, grid: Option<&LambdaGrid>) -> Result<f64> {
    population_loss_grad(w, pi, spec, grid).map(|(l, _)| l)
}

/// [`population_loss`] together with its gradient in `w`.
pub fn population_loss_grad(
    w: &[f64],
    pi: &FiniteDistribution,
    spec: &LossSpec,
    grid: Option<&LambdaGrid>,
) -> Result<(f64, Array1<f64>)> {
    spec.validate()?;
    if !pi.is_binary() {
        return Err(Error::Mode(format!("population loss of a linear sigmoid model needs binary labels, got k={}", pi.k)));
    }
    if w.len() != pi.d() {
        return Err(Error::Shape(format!("weight length {} vs dimension {}", w.len(), pi.d())));
    }
    let w = ArrayView1::from(w);
    let scores = pi.points.dot(&w);
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("non-finite score in population loss".into()));
    }
    let positive: Vec<f64> = pi.labels.iter().map(|&y| if y > 0 { 1.0 } else { 0.0 }).collect();
    let eps = spec.output_clamp_eps;
    let mut coef = Array1::<f64>::zeros(pi.m());
    let mut loss = 0.0;
    match grid_for(spec, grid)? {
        None => {
            let alpha = match spec.kind {
                LossKind::LabelSmoothing { alpha } => alpha,
                _ => 0.0,
            };
            for i in 0..pi.m() {
                let t = positive[i] * (1.0 - alpha) + alpha / 2.0;
                loss += pi.probs[i] * binary_soft_ce(scores[i], t, eps);
                coef[i] = pi.probs[i] * (sigmoid(scores[i]) - t);
            }
        }
        Some(grid) => {
            for i in 0..pi.m() {
                for j in 0..pi.m() {
                    let pair = pi.probs[i] * pi.probs[j];
                    if pair == 0.0 {
                        continue;
                    }
                    for (lambda, weight) in grid.iter() {
                        let mass = pair * weight;
                        let z = lambda * scores[i] + (1.0 - lambda) * scores[j];
                        let t = lambda * positive[i] + (1.0 - lambda) * positive[j];
                        loss += mass * binary_soft_ce(z, t, eps);
                        let r = mass * (sigmoid(z) - t);
                        coef[i] += r * lambda;
                        coef[j] += r * (1.0 - lambda);
                    }
                }
            }
        }
    }
    Ok((loss, pi.points.t().dot(&coef)))
}

/// Minimal label-smoothing loss over all predictors when every support point
/// carries one label: the entropy of the smoothed target.
pub fn opt_ls_value(pi: &FiniteDistribution, alpha: f64, k: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::config(format!("alpha {alpha} outside [0, 1]")));
    }
    if k != pi.k {
        return Err(Error::config(format!("k={k} but distribution has {} classes", pi.k)));
    }
    for i in 0..pi.m() {
        for j in (i + 1)..pi.m() {
            if pi.labels[i] != pi.labels[j] && pi.point(i) == pi.point(j) {
                return Err(Error::config(format!(
                    "support points {i} and {j} coincide with conflicting labels; use opt_mixup_value with a unit point mass"
                )));
            }
        }
    }
    let kf = k as f64;
    Ok(-(xlogx(1.0 - alpha + alpha / kf) + (kf - 1.0) * xlogx(alpha / kf)))
}

/// One distinct mixed point with its total mass and the mass-weighted mean
/// target, which is the loss-minimising prediction there.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedGroup {
    pub point: Vec<f64>,
    pub mass: f64,
    pub target: Vec<f64>,
}

/// Enumerates every mixed point `lambda x_i + (1 - lambda) x_j` over ordered
/// support pairs and grid nodes, merging points that agree to within 1e-12 in
/// every coordinate.
pub fn mixup_groups(pi: &FiniteDistribution, grid: &LambdaGrid) -> Result<Vec<MixedGroup>> {
    grid.validate()?;
    let classes = pi.class_indices();
    let (m, d, k) = (pi.m(), pi.d(), pi.k);
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut entries: Vec<(f64, usize, usize, f64)> = Vec::new();
    for i in 0..m {
        for j in 0..m {
            for (lambda, weight) in grid.iter() {
                let mass = pi.probs[i] * pi.probs[j] * weight;
                if mass == 0.0 {
                    continue;
                }
                let z: Vec<f64> = (0..d).map(|c| lambda * pi.points[[i, c]] + (1.0 - lambda) * pi.points[[j, c]]).collect();
                points.push(z);
                entries.push((mass, classes[i], classes[j], lambda));
            }
        }
    }

    // Union-find over pairs whose first coordinates are within tolerance.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]));
    let mut parent: Vec<usize> = (0..points.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (pos, &a) in order.iter().enumerate() {
        for &b in &order[pos + 1..] {
            if points[b][0] - points[a][0] > COINCIDENCE_TOL {
                break;
            }
            if points[a].iter().zip(&points[b]).all(|(u, v)| (u - v).abs() <= COINCIDENCE_TOL) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }

    let mut slot = vec![usize::MAX; points.len()];
    let mut groups: Vec<MixedGroup> = Vec::new();
    for e in 0..points.len() {
        let root = find(&mut parent, e);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(MixedGroup {
                point: points[root].clone(),
                mass: 0.0,
                target: vec![0.0; k],
            });
        }
        let g = &mut groups[slot[root]];
        let (mass, c1, c2, lambda) = entries[e];
        g.mass += mass;
        g.target[c1] += mass * lambda;
        g.target[c2] += mass * (1.0 - lambda);
    }
    for g in &mut groups {
        let mass = g.mass;
        g.target.iter_mut().for_each(|t| *t /= mass);
    }
    Ok(groups)
}

/// Minimal Mixup loss over all predictors: each distinct mixed point predicts
/// its mean target, contributing mass times the entropy of that target.
pub fn opt_mixup_value(pi: &FiniteDistribution, grid: &LambdaGrid) -> Result<f64> {
    Ok(mixup_groups(pi, grid)?
        .iter()
        .map(|g| -g.mass * g.target.iter().map(|&t| xlogx(t)).sum::<f64>())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::MixingDistribution;
    use ndarray::array;

    fn symmetric_pair() -> FiniteDistribution {
        FiniteDistribution::new(array![[1.0], [-1.0]], vec![1, -1], vec![0.5, 0.5], 2).unwrap()
    }

    #[test]
    fn single_point_zero_weight_is_ln2() {
        let pi = FiniteDistribution::new(array![[1.0]], vec![1], vec![1.0], 2);
        // One class only has no mass for -1.
        assert!(pi.is_err());
        let pi = FiniteDistribution::new(array![[1.0], [-1.0]], vec![1, -1], vec![1.0 - 1e-300, 1e-300], 2).unwrap();
        let l = population_loss(&[0.0], &pi, &LossSpec::cross_entropy(), None).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn symmetric_points_ls_zero() {
        let pi = FiniteDistribution::new(array![[1.0, 1.0], [-1.0, -1.0]], vec![1, -1], vec![0.5, 0.5], 2).unwrap();
        // w = (1, 0) gives margin 1 on both points: -ln sigmoid(1).
        let l = population_loss(&[1.0, 0.0], &pi, &LossSpec::label_smoothing(0.0), None).unwrap();
        assert!((l - 0.31326168751822286).abs() < 1e-12);
    }

    #[test]
    fn mixup_point_mass_one_is_ce() {
        let pi = FiniteDistribution::new(array![[1.0, 0.5], [-0.3, 2.0], [0.2, -1.0]], vec![1, -1, 1], vec![0.2, 0.5, 0.3], 2).unwrap();
        let w = [0.7, -0.4];
        let ce = population_loss_grad(&w, &pi, &LossSpec::cross_entropy(), None).unwrap();
        let mix = population_loss_grad(&w, &pi, &LossSpec::mixup(MixingDistribution::PointMass { lambda: 1.0 }), None).unwrap();
        assert!((ce.0 - mix.0).abs() < 1e-12);
        for (a, b) in ce.1.iter().zip(mix.1.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn opt_ls_closed_forms() {
        let pi = symmetric_pair();
        assert!((opt_ls_value(&pi, 0.2, 2).unwrap() - 0.3250829733914482).abs() < 1e-12);
        assert_eq!(opt_ls_value(&pi, 0.0, 2).unwrap(), 0.0);
        assert!(opt_ls_value(&pi, 1e-9, 2).unwrap() < 1e-7);
        let pts = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let pi10 = FiniteDistribution::new(pts, (0..10).collect(), vec![0.1; 10], 10).unwrap();
        let v = opt_ls_value(&pi10, 0.1, 10).unwrap();
        let direct = -(0.91f64 * 0.91f64.ln() + 9.0 * 0.01 * 0.01f64.ln());
        assert!((v - direct).abs() < 1e-14);
        assert!((v - 0.50027).abs() < 1e-4, "{v}");
    }

    #[test]
    fn opt_ls_rejects_conflicting_duplicates() {
        let pi = FiniteDistribution::new(array![[1.0], [1.0]], vec![1, -1], vec![0.5, 0.5], 2).unwrap();
        assert!(opt_ls_value(&pi, 0.1, 2).is_err());
    }

    #[test]
    fn opt_mixup_hand_enumeration() {
        let pi = symmetric_pair();
        assert_eq!(opt_mixup_value(&pi, &LambdaGrid::point_mass(1.0)).unwrap(), 0.0);
        // Pairs (+,-) and (-,+) both land on 0 with mass 1/2 and target (1/2, 1/2).
        let half = opt_mixup_value(&pi, &LambdaGrid::point_mass(0.5)).unwrap();
        assert!((half - 0.5 * std::f64::consts::LN_2).abs() < 1e-15);
        let groups = mixup_groups(&pi, &LambdaGrid::point_mass(0.5)).unwrap();
        assert_eq!(groups.len(), 3);
    }

    #[test]
    fn opt_mixup_relabel_invariant() {
        let grid = LambdaGrid::uniform_on(&[0.25, 0.75]).unwrap();
        let pi = FiniteDistribution::new(array![[1.0, 0.0], [0.0, 2.0], [-1.0, 0.5]], vec![1, -1, 1], vec![0.3, 0.3, 0.4], 2).unwrap();
        let flipped = FiniteDistribution::new(pi.points.clone(), vec![-1, 1, -1], pi.probs.clone(), 2).unwrap();
        let a = opt_mixup_value(&pi, &grid).unwrap();
        let b = opt_mixup_value(&flipped, &grid).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn csv_import() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pi.csv");
        std::fs::write(&p, "x1,x2,label,prob\n1,0,1,0.25\n0,1,-1,0.75\n").unwrap();
        let pi = FiniteDistribution::from_csv(&p, 2).unwrap();
        assert!(pi.is_binary());
        assert_eq!(pi.class_masses(), vec![0.75, 0.25]);
        std::fs::write(&p, "x1,label,prob\n1,1,0.5\n0,-1,0.6\n").unwrap();
        assert!(FiniteDistribution::from_csv(&p, 2).is_err());
    }

    #[test]
    fn mode_mismatch() {
        let pi = FiniteDistribution::new(array![[1.0], [2.0], [3.0]], vec![0, 1, 2], vec![0.2, 0.3, 0.5], 3).unwrap();
        assert!(matches!(population_loss(&[1.0], &pi, &LossSpec::cross_entropy(), None), Err(Error::Mode(_))));
    }
}
