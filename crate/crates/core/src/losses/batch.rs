use ndarray::{Array2, ArrayView2, Axis};

use super::{clamp_log, smoothed_target, LossKind, LossSpec};
use crate::{Error, Result};

/// Per-row targets as class indices. Binary models use class 0 for the -1
/// label and class 1 for +1.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Labels(&'a [usize]),
    /// Mixup targets: weight `lambda` on `first[i]`, `1 - lambda` on
    /// `second[i]`.
    Mixed {
        first: &'a [usize],
        second: &'a [usize],
        lambda: f64,
    },
}

impl Targets<'_> {
    fn len(&self) -> usize {
        match self {
            Targets::Labels(y) => y.len(),
            Targets::Mixed { first, .. } => first.len(),
        }
    }
}

/// Features `lambda * x1 + (1 - lambda) * x2` with the label pair retained.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedBatch {
    pub features: Array2<f64>,
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub lambda: f64,
}

impl MixedBatch {
    pub fn targets(&self) -> Targets<'_> {
        Targets::Mixed {
            first: &self.first,
            second: &self.second,
            lambda: self.lambda,
        }
    }
}

pub fn mix_pairs(
    x1: ArrayView2<f64>,
    y1: &[usize],
    x2: ArrayView2<f64>,
    y2: &[usize],
    lambda: f64,
) -> Result<MixedBatch> {
    if x1.dim() != x2.dim() || y1.len() != y2.len() || y1.len() != x1.nrows() {
        return Err(Error::Shape(format!(
            "mixup pair shapes differ: {:?}/{} vs {:?}/{}",
            x1.dim(),
            y1.len(),
            x2.dim(),
            y2.len()
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::config(format!("lambda {lambda} outside [0, 1]")));
    }
    let features = &x1 * lambda + &x2 * (1.0 - lambda);
    Ok(MixedBatch {
        features,
        first: y1.to_vec(),
        second: y2.to_vec(),
        lambda,
    })
}

/// Mean loss over the batch and its exact gradient with respect to the
/// logits.
///
/// `logits` has one column for binary (sigmoid) models and `k` columns for
/// softmax models. Mixup specs accept either plain labels (treated as an
/// unmixed batch, i.e. cross-entropy) or mixed targets; CE and label smoothing
/// accept plain labels only.
pub fn batch_loss_grad(logits: ArrayView2<f64>, targets: Targets<'_>, spec: &LossSpec) -> Result<(f64, Array2<f64>)> {
    let (n, cols) = logits.dim();
    if n == 0 || cols == 0 {
        return Err(Error::Shape("empty logit batch".into()));
    }
    if targets.len() != n {
        return Err(Error::Shape(format!("{} targets for {n} logit rows", targets.len())));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite logit".into()));
    }
    let k = if cols == 1 { 2 } else { cols };
    let alpha = match (&spec.kind, &targets) {
        (LossKind::LabelSmoothing { alpha }, Targets::Labels(_)) => *alpha,
        (LossKind::Mixup { .. }, _) | (LossKind::CrossEntropy, Targets::Labels(_)) => 0.0,
        (_, Targets::Mixed { .. }) => {
            return Err(Error::Mode(format!("mixed targets given to non-mixup loss {}", spec.label())));
        }
    };
    let eps = spec.output_clamp_eps;
    let check = |c: usize| {
        if c < k {
            Ok(c)
        } else {
            Err(Error::config(format!("class {c} outside [0, {k})")))
        }
    };

    let mut target = vec![0.0; k];
    let mut grad = Array2::zeros((n, cols));
    let mut total = 0.0;
    let scale = 1.0 / n as f64;
    let mut logp = vec![0.0; k];
    for (i, (row, mut g)) in logits.axis_iter(Axis(0)).zip(grad.axis_iter_mut(Axis(0))).enumerate() {
        match targets {
            Targets::Labels(y) => smoothed_target(check(y[i])?, k, alpha, &mut target),
            Targets::Mixed { first, second, lambda } => {
                target.iter_mut().for_each(|t| *t = 0.0);
                target[check(first[i])?] += lambda;
                target[check(second[i])?] += 1.0 - lambda;
            }
        }
        if cols == 1 {
            let z = row[0];
            logp[1] = super::log_sigmoid(z);
            logp[0] = super::log_sigmoid(-z);
            g[0] = (super::sigmoid(z) - target[1]) * scale;
        } else {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
            for j in 0..k {
                logp[j] = row[j] - lse;
                g[j] = (logp[j].exp() - target[j]) * scale;
            }
        }
        for j in 0..k {
            if target[j] != 0.0 {
                total -= target[j] * clamp_log(logp[j], eps);
            }
        }
    }
    Ok((total * scale, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::MixingDistribution;
    use ndarray::array;

    #[test]
    fn zero_margin_binary_is_ln2_for_any_alpha() {
        for alpha in [0.0, 0.1, 0.5, 1.0] {
            let (loss, _) = batch_loss_grad(array![[0.0]].view(), Targets::Labels(&[1]), &LossSpec::label_smoothing(alpha)).unwrap();
            assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = Array2::from_elem((3, 10), 0.7);
        let (loss, grad) = batch_loss_grad(logits.view(), Targets::Labels(&[0, 4, 9]), &LossSpec::cross_entropy()).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-14);
        assert!((grad[[1, 4]] - (0.1 - 1.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn label_smoothing_stationary_margin() {
        // sigmoid(z) = 1 - alpha/2 = 0.9 is the stationary point.
        let z = (0.9f64 / 0.1).ln();
        let (loss, grad) = batch_loss_grad(array![[z]].view(), Targets::Labels(&[1]), &LossSpec::label_smoothing(0.2)).unwrap();
        let expected = -(0.9 * 0.9f64.ln() + 0.1 * 0.1f64.ln());
        assert!((loss - expected).abs() < 1e-12);
        assert!((expected - 0.32508).abs() < 1e-5);
        assert!(grad[[0, 0]].abs() < 1e-15);
        // Same by symmetry for the negative class.
        let (l2, _) = batch_loss_grad(array![[-z]].view(), Targets::Labels(&[0]), &LossSpec::label_smoothing(0.2)).unwrap();
        assert!((l2 - expected).abs() < 1e-12);
    }

    #[test]
    fn mixed_targets_require_mixup_spec() {
        let t = Targets::Mixed { first: &[0], second: &[1], lambda: 0.5 };
        assert!(matches!(batch_loss_grad(array![[0.0]].view(), t, &LossSpec::cross_entropy()), Err(Error::Mode(_))));
        let spec = LossSpec::mixup(MixingDistribution::Uniform01);
        let (loss, grad) = batch_loss_grad(array![[0.0]].view(), t, &spec).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(grad[[0, 0]].abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let spec = LossSpec::cross_entropy();
        assert!(matches!(batch_loss_grad(array![[f64::NAN]].view(), Targets::Labels(&[0]), &spec), Err(Error::Numeric(_))));
        assert!(batch_loss_grad(array![[0.0], [1.0]].view(), Targets::Labels(&[0]), &spec).is_err());
        assert!(batch_loss_grad(array![[0.0, 1.0]].view(), Targets::Labels(&[2]), &spec).is_err());
    }

    #[test]
    fn clamp_bounds_extreme_logits() {
        let (loss, grad) = batch_loss_grad(array![[-1e4]].view(), Targets::Labels(&[1]), &LossSpec::cross_entropy()).unwrap();
        assert!((loss - (-(1e-12f64).ln())).abs() < 1e-9);
        assert!((grad[[0, 0]] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn mix_pairs_midpoint() {
        let x1 = array![[2.0, 0.0]];
        let x2 = array![[0.0, 2.0]];
        let m = mix_pairs(x1.view(), &[1], x2.view(), &[0], 0.5).unwrap();
        assert_eq!(m.features, array![[1.0, 1.0]]);
        let one = mix_pairs(x1.view(), &[1], x2.view(), &[0], 1.0).unwrap();
        assert_eq!(one.features, x1);
        assert!(mix_pairs(x1.view(), &[1], array![[1.0]].view(), &[0], 0.5).is_err());
    }
}
