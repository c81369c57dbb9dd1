use serde::{Deserialize, Serialize};

use crate::losses::sigmoid;
use crate::{Error, Result};

/// Scalar convex functions with closed-form second derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexScalar {
    /// `a x^2`, `a > 0`.
    Quadratic { a: f64 },
    /// `-t ln sigmoid(z) - (1 - t) ln sigmoid(-z)` for `t` in `[0, 1]`.
    SoftTargetCe { t: f64 },
    /// `ln(1 + e^x)`.
    Softplus,
    Exp,
    LogCosh,
}

impl ConvexScalar {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            ConvexScalar::Quadratic { a } => a * x * x,
            ConvexScalar::SoftTargetCe { t } => {
                let ls = |z: f64| crate::losses::log_sigmoid(z);
                -t * ls(x) - (1.0 - t) * ls(-x)
            }
            ConvexScalar::Softplus => -crate::losses::log_sigmoid(-x),
            ConvexScalar::Exp => x.exp(),
            ConvexScalar::LogCosh => {
                let a = x.abs();
                a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
            }
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match *self {
            ConvexScalar::Quadratic { a } => 2.0 * a,
            ConvexScalar::SoftTargetCe { .. } | ConvexScalar::Softplus => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            ConvexScalar::Exp => x.exp(),
            ConvexScalar::LogCosh => {
                let c = 1.0 / x.cosh();
                c * c
            }
        }
    }

    /// Exact `(min, max)` of the second derivative on `[lo, hi]`.
    pub fn curvature_range(&self, lo: f64, hi: f64) -> (f64, f64) {
        match *self {
            ConvexScalar::Quadratic { a } => (2.0 * a, 2.0 * a),
            ConvexScalar::Exp => (lo.exp(), hi.exp()),
            // Even functions decreasing in |x|.
            _ => {
                let nearest = if lo <= 0.0 && hi >= 0.0 { 0.0 } else if lo > 0.0 { lo } else { hi };
                let farthest = if lo.abs() > hi.abs() { lo } else { hi };
                (self.second_derivative(farthest), self.second_derivative(nearest))
            }
        }
    }
}

/// Distribution of a real random variable with finite support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarDistribution {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ScalarDistribution {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::Shape(format!("{} values, {} probabilities", values.len(), probs.len())));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("probabilities must be non-negative and values finite"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("probabilities sum to {total}, not 1")));
        }
        Ok(ScalarDistribution { values, probs })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.probs).map(|(v, p)| v * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().zip(&self.probs).map(|(v, p)| p * (v - m).powi(2)).sum()
    }

    /// Smallest interval containing every value with positive probability.
    pub fn hull(&self) -> (f64, f64) {
        self.values
            .iter()
            .zip(&self.probs)
            .filter(|(_, p)| **p > 0.0)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (v, _)| (lo.min(*v), hi.max(*v)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JensenCheck {
    pub gap: f64,
    pub lower: f64,
    pub upper: f64,
    pub variance: f64,
    pub pass: bool,
}

/// Checks `gamma1/2 Var(X) <= E[phi(X)] - phi(E[X]) <= gamma2/2 Var(X)`.
///
/// The supplied bounds must be valid on the convex hull of the support:
/// `gamma1 <= min phi''` and `gamma2 >= max phi''` there.
pub fn jensen_gap_check(phi: &ConvexScalar, dist: &ScalarDistribution, gamma1: f64, gamma2: f64) -> Result<JensenCheck> {
    if !(gamma1 >= 0.0 && gamma1 <= gamma2 && gamma2.is_finite()) {
        return Err(Error::config(format!("invalid curvature bounds ({gamma1}, {gamma2})")));
    }
    let (lo, hi) = dist.hull();
    let (cmin, cmax) = phi.curvature_range(lo, hi);
    let slack = 1e-12 * cmax.abs().max(1.0);
    if gamma1 > cmin + slack || gamma2 < cmax - slack {
        return Err(Error::config(format!(
            "bounds ({gamma1}, {gamma2}) do not enclose the curvature range ({cmin}, {cmax}) on [{lo}, {hi}]"
        )));
    }
    let mean = dist.mean();
    let expected: f64 = dist.values.iter().zip(&dist.probs).map(|(v, p)| p * phi.value(*v)).sum();
    let gap = expected - phi.value(mean);
    let variance = dist.variance();
    let lower = gamma1 / 2.0 * variance;
    let upper = gamma2 / 2.0 * variance;
    let pass = gap >= lower - 1e-10 && gap <= upper + 1e-10;
    Ok(JensenCheck {
        gap,
        lower,
        upper,
        variance,
        pass,
    })
}
