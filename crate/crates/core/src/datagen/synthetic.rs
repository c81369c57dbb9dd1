use ndarray::Array2;
use rand::Rng;

use super::{Dataset, SyntheticConfig};
use crate::rng::seeded;
use crate::{Error, Result};

fn draw_label<R: Rng>(rng: &mut R) -> i64 {
    if rng.random::<bool>() {
        1
    } else {
        -1
    }
}

/// Samples the low/high variance distribution.
///
/// Coordinates `0..d/2` are exactly `gamma * y`; the remaining ones are i.i.d.
/// uniform on `[lo, hi]` scaled by `y` (so the interval is `[-hi, -lo]` for
/// the negative class).
pub fn sample_lowvar_highvar(cfg: &SyntheticConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = seeded(cfg.seed);
    let split = cfg.d / 2;
    let (lo, hi) = cfg.high_range;
    let mut features = Array2::zeros((cfg.n, cfg.d));
    let mut labels = Vec::with_capacity(cfg.n);
    for mut row in features.rows_mut() {
        let y = draw_label(&mut rng);
        let sign = y as f64;
        for (j, v) in row.iter_mut().enumerate() {
            *v = if j < split {
                cfg.gamma * sign
            } else {
                sign * rng.random_range(lo..=hi)
            };
        }
        labels.push(y);
    }
    Dataset::new(
        features,
        labels,
        2,
        (0..split).collect(),
        format!("lowvar_highvar(d={}, gamma={}, range={lo}..{hi})", cfg.d, cfg.gamma),
    )
}

/// Two-dimensional distribution: the first coordinate is uniform on
/// `[y, 10y]`, the second is fixed at `0.1 y`.
pub fn sample_boundary_2d(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::config("n must be positive"));
    }
    let mut rng = seeded(seed);
    let mut features = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for mut row in features.rows_mut() {
        let y = draw_label(&mut rng);
        let sign = y as f64;
        row[0] = sign * rng.random_range(1.0..=10.0);
        row[1] = 0.1 * sign;
        labels.push(y);
    }
    Dataset::new(features, labels, 2, vec![1], "boundary_2d")
}

/// Replaces the first feature of every row with `gamma * y`.
pub fn inject_spurious_dim(ds: &Dataset, gamma: f64) -> Result<Dataset> {
    ds.require_binary("inject_spurious_dim")?;
    if !gamma.is_finite() {
        return Err(Error::config(format!("gamma must be finite, got {gamma}")));
    }
    let mut out = ds.clone();
    for (mut row, &y) in out.features.rows_mut().into_iter().zip(&ds.labels) {
        row[0] = gamma * y as f64;
    }
    out.low_var_dims = vec![0];
    out.name = format!("{}+spurious(gamma={gamma})", ds.name);
    Ok(out)
}

/// Adds `width * (u - 1/2)` with `u ~ Uniform[0, 1)` to every low-variance
/// coordinate. The uniform draws depend only on `seed`, so datasets built
/// with different widths share the same underlying noise pattern.
pub fn add_low_var_noise(ds: &Dataset, width: f64, seed: u64) -> Result<Dataset> {
    if !(width >= 0.0 && width.is_finite()) {
        return Err(Error::config(format!("noise width must be non-negative, got {width}")));
    }
    let mut rng = seeded(seed);
    let mut out = ds.clone();
    for mut row in out.features.rows_mut() {
        for &j in &ds.low_var_dims {
            let u: f64 = rng.random();
            row[j] += width * (u - 0.5);
        }
    }
    out.name = format!("{}+lownoise({width})", ds.name);
    Ok(out)
}
