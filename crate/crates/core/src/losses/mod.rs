//! Training objectives: cross-entropy, label smoothing and Mixup.
//!
//! Binary models produce a single logit `z` and the probability of the +1
//! class is `sigmoid(z)`; multiclass models produce `k` logits passed through
//! softmax. Every objective is evaluated as a cross-entropy against a soft
//! target distribution:
//!
//! | objective        | target for label `y`                      |
//! |------------------|-------------------------------------------|
//! | CE               | one-hot `e_y`                             |
//! | LS(alpha)        | `(1 - alpha) e_y + alpha / k`             |
//! | Mixup, pair y1,y2| `lambda e_y1 + (1 - lambda) e_y2`         |
//!
//! which is exactly the binary form `-(1 - a/2) log g(yx) - (a/2) log g(-yx)`
//! for label smoothing with `k = 2`. An explicit L2 penalty `beta/2 |w|^2` is
//! a model-level term and is never added by the functions here.

mod batch;
mod mixing;
mod population;

pub use batch::{batch_loss_grad, mix_pairs, MixedBatch, Targets};
pub use mixing::{sample_lambda, LambdaGrid, MixingDistribution, BETA_GRID_POINTS};
pub use population::{
    mixup_groups, opt_ls_value, opt_mixup_value, population_loss, population_loss_grad, FiniteDistribution,
    MixedGroup,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_CLAMP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    LabelSmoothing { alpha: f64 },
    Mixup { mixing: MixingDistribution },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Coefficient of the explicit `beta/2 |w|^2` penalty (used by the
    /// full-batch gradient descent solver only).
    #[serde(default)]
    pub l2_beta: f64,
    #[serde(default = "default_eps")]
    pub output_clamp_eps: f64,
}

fn default_eps() -> f64 {
    DEFAULT_CLAMP_EPS
}

impl LossSpec {
    pub fn cross_entropy() -> Self {
        Self::from_kind(LossKind::CrossEntropy)
    }

    pub fn label_smoothing(alpha: f64) -> Self {
        Self::from_kind(LossKind::LabelSmoothing { alpha })
    }

    pub fn mixup(mixing: MixingDistribution) -> Self {
        Self::from_kind(LossKind::Mixup { mixing })
    }

    pub fn with_l2(mut self, beta: f64) -> Self {
        self.l2_beta = beta;
        self
    }

    fn from_kind(kind: LossKind) -> Self {
        LossSpec {
            kind,
            l2_beta: 0.0,
            output_clamp_eps: DEFAULT_CLAMP_EPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            LossKind::CrossEntropy => {}
            LossKind::LabelSmoothing { alpha } => {
                if !(0.0..=1.0).contains(alpha) {
                    return Err(Error::config(format!("label smoothing alpha must lie in [0, 1], got {alpha}")));
                }
            }
            LossKind::Mixup { mixing } => mixing.validate()?,
        }
        if !(self.l2_beta >= 0.0 && self.l2_beta.is_finite()) {
            return Err(Error::config(format!("l2_beta must be non-negative, got {}", self.l2_beta)));
        }
        if !(self.output_clamp_eps > 0.0 && self.output_clamp_eps < 0.5) {
            return Err(Error::config(format!("output_clamp_eps must lie in (0, 0.5), got {}", self.output_clamp_eps)));
        }
        Ok(())
    }

    pub fn is_mixup(&self) -> bool {
        matches!(self.kind, LossKind::Mixup { .. })
    }

    /// Short human-readable tag, e.g. `ls(0.1)`.
    pub fn label(&self) -> String {
        match &self.kind {
            LossKind::CrossEntropy => "ce".into(),
            LossKind::LabelSmoothing { alpha } => format!("ls({alpha})"),
            LossKind::Mixup { mixing } => format!("mixup({})", mixing.label()),
        }
    }
}

/// Smoothed target distribution over `k` classes for a single label.
pub(crate) fn smoothed_target(class: usize, k: usize, alpha: f64, out: &mut [f64]) {
    let base = alpha / k as f64;
    out.iter_mut().for_each(|t| *t = base);
    out[class] += 1.0 - alpha;
}

/// `log sigmoid(z)` without overflow.
pub(crate) fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Logistic function, evaluated without overflow.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Clamps a log-probability into `[ln eps, ln(1 - eps)]`.
pub(crate) fn clamp_log(lp: f64, eps: f64) -> f64 {
    lp.clamp(eps.ln(), (-eps).ln_1p())
}

/// Binary cross-entropy against a soft target `t` = P(+1), from the logit.
pub(crate) fn binary_soft_ce(z: f64, t: f64, eps: f64) -> f64 {
    let mut loss = 0.0;
    if t != 0.0 {
        loss -= t * clamp_log(log_sigmoid(z), eps);
    }
    if t != 1.0 {
        loss -= (1.0 - t) * clamp_log(log_sigmoid(-z), eps);
    }
    loss
}

/// `x ln x` with the continuous extension at 0.
pub(crate) fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}
