//! Variance metrics, weight-norm splits, the Jensen-gap verifier and the
//! lower-bound certificates for label smoothing and Mixup.

mod boundary;
mod certificate;
mod jensen;
mod variance;

pub use boundary::{boundary_grid, BoundaryGrid, Region};
pub use certificate::{
    ls_lower_bound_certificate, mixup_lower_bound_certificate, Certificate, GroupOptimalPredictor, Predictor, CERTIFICATE_TOL,
};
pub use jensen::{jensen_gap_check, ConvexScalar, JensenCheck, ScalarDistribution};
pub use variance::{output_variance_report, per_class_total_variance, target_class_output_variance, VarianceReport};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightNormSplit {
    pub norm_low: f64,
    pub norm_high: f64,
    /// `|w_1| / |w_rest|`; `+inf` when the denominator is zero.
    pub ratio_first: f64,
    pub ratio_infinite: bool,
}

/// Norms of `w` on `low` (zero-based indices) and on its complement, and the
/// first-coordinate ratio.
pub fn weight_norm_split(w: &[f64], low: &[usize]) -> Result<WeightNormSplit> {
    if let Some(&bad) = low.iter().find(|&&i| i >= w.len()) {
        return Err(Error::config(format!("index {bad} outside [0, {})", w.len())));
    }
    let (mut sl, mut sh) = (0.0, 0.0);
    for (i, v) in w.iter().enumerate() {
        if low.contains(&i) {
            sl += v * v;
        } else {
            sh += v * v;
        }
    }
    let rest: f64 = w.iter().skip(1).map(|v| v * v).sum::<f64>().sqrt();
    let first = w.first().map_or(0.0, |v| v.abs());
    let ratio_infinite = rest == 0.0;
    Ok(WeightNormSplit {
        norm_low: sl.sqrt(),
        norm_high: sh.sqrt(),
        ratio_first: if ratio_infinite { f64::INFINITY } else { first / rest },
        ratio_infinite,
    })
}
