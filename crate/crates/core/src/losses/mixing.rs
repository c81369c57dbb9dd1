use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of cells in the discretised Beta quadrature.
pub const BETA_GRID_POINTS: usize = 129;

/// Distribution of the Mixup weight `lambda` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixingDistribution {
    Beta { a: f64, b: f64 },
    PointMass { lambda: f64 },
    Uniform01,
}

impl MixingDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MixingDistribution::Beta { a, b } if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) => {
                Err(Error::config(format!("Beta parameters must be positive, got ({a}, {b})")))
            }
            MixingDistribution::PointMass { lambda } if !(0.0..=1.0).contains(&lambda) => {
                Err(Error::config(format!("point mass must lie in [0, 1], got {lambda}")))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            MixingDistribution::Beta { a, b } => format!("beta({a},{b})"),
            MixingDistribution::PointMass { lambda } => format!("point({lambda})"),
            MixingDistribution::Uniform01 => "uniform".into(),
        }
    }
}

fn gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0).expect("validated shape").sample(rng)
}

/// Draws one mixing weight. Beta variates are formed as `X / (X + Y)` from
/// two Gamma draws.
pub fn sample_lambda<R: Rng + ?Sized>(dist: &MixingDistribution, rng: &mut R) -> f64 {
    match *dist {
        MixingDistribution::PointMass { lambda } => lambda,
        MixingDistribution::Uniform01 => rng.random::<f64>(),
        MixingDistribution::Beta { a, b } => loop {
            let x = gamma_draw(a, rng);
            let y = gamma_draw(b, rng);
            let s = x + y;
            if s > 0.0 && s.is_finite() {
                break (x / s).clamp(0.0, 1.0);
            }
        },
    }
}

/// Finite quadrature over `lambda`: nodes in `[0, 1]` with non-negative
/// weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LambdaGrid {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let grid = LambdaGrid { nodes, weights };
        grid.validate()?;
        Ok(grid)
    }

    pub fn point_mass(lambda: f64) -> Self {
        LambdaGrid {
            nodes: vec![lambda],
            weights: vec![1.0],
        }
    }

    /// Equal weights on the given nodes.
    pub fn uniform_on(nodes: &[f64]) -> Result<Self> {
        let w = 1.0 / nodes.len() as f64;
        Self::new(nodes.to_vec(), vec![w; nodes.len()])
    }

    /// Discretisation of a mixing distribution. Beta (and Uniform01 as
    /// Beta(1,1)) use the midpoints of [`BETA_GRID_POINTS`] equal cells with
    /// weights proportional to the unnormalised density, renormalised.
    pub fn for_distribution(dist: &MixingDistribution) -> Result<Self> {
        dist.validate()?;
        let (a, b) = match *dist {
            MixingDistribution::PointMass { lambda } => return Ok(Self::point_mass(lambda)),
            MixingDistribution::Uniform01 => (1.0, 1.0),
            MixingDistribution::Beta { a, b } => (a, b),
        };
        let m = BETA_GRID_POINTS as f64;
        let nodes: Vec<f64> = (0..BETA_GRID_POINTS).map(|i| (i as f64 + 0.5) / m).collect();
        // Log-space keeps tiny or huge shape parameters finite.
        let logs: Vec<f64> = nodes.iter().map(|&x| (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p()).collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = raw.iter().sum();
        Self::new(nodes, raw.iter().map(|w| w / total).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() || self.nodes.len() != self.weights.len() {
            return Err(Error::config(format!(
                "lambda grid needs matching non-empty nodes/weights, got {}/{}",
                self.nodes.len(),
                self.weights.len()
            )));
        }
        if let Some(x) = self.nodes.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::config(format!("lambda node {x} outside [0, 1]")));
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w >= 0.0)) {
            return Err(Error::config(format!("negative lambda weight {w}")));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("lambda weights sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(x, w)| x * w).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn moments(dist: &MixingDistribution, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = seeded(seed);
        let xs: Vec<f64> = (0..n).map(|_| sample_lambda(dist, &mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(xs.iter().all(|x| (0.0..=1.0).contains(x)));
        (mean, var)
    }

    #[test]
    fn point_mass_is_constant() {
        let mut rng = seeded(1);
        for _ in 0..10 {
            assert_eq!(sample_lambda(&MixingDistribution::PointMass { lambda: 1.0 }, &mut rng), 1.0);
        }
    }

    #[test]
    fn beta_one_one_mean() {
        let (mean, _) = moments(&MixingDistribution::Beta { a: 1.0, b: 1.0 }, 100_000, 2);
        assert!((mean - 0.5).abs() < 0.005, "{mean}");
    }

    #[test]
    fn beta_eight_eight_variance() {
        // ab / ((a+b)^2 (a+b+1)) = 64 / (256 * 17) = 1/68.
        let (_, var) = moments(&MixingDistribution::Beta { a: 8.0, b: 8.0 }, 100_000, 3);
        assert!((var - 1.0 / 68.0).abs() < 0.1 / 68.0, "{var}");
    }

    #[test]
    fn small_shape_beta_is_bimodal_but_valid() {
        let (mean, var) = moments(&MixingDistribution::Beta { a: 0.1, b: 0.1 }, 20_000, 4);
        assert!((mean - 0.5).abs() < 0.02);
        // Var of Beta(0.1,0.1) = 0.01 / (0.04 * 1.2) = 0.2083
        assert!((var - 0.2083).abs() < 0.01, "{var}");
    }

    #[test]
    fn reproducible_from_rng_state() {
        let d = MixingDistribution::Beta { a: 2.0, b: 3.0 };
        let a: Vec<f64> = {
            let mut r = seeded(5);
            (0..5).map(|_| sample_lambda(&d, &mut r)).collect()
        };
        let b: Vec<f64> = {
            let mut r = seeded(5);
            (0..5).map(|_| sample_lambda(&d, &mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn beta_grid_is_normalised_and_interior() {
        let g = LambdaGrid::for_distribution(&MixingDistribution::Beta { a: 0.5, b: 0.5 }).unwrap();
        assert_eq!(g.nodes.len(), BETA_GRID_POINTS);
        assert!(g.nodes.iter().all(|&x| x > 0.0 && x < 1.0));
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((g.mean() - 0.5).abs() < 1e-12);
        let skew = LambdaGrid::for_distribution(&MixingDistribution::Beta { a: 2.0, b: 6.0 }).unwrap();
        assert!((skew.mean() - 0.25).abs() < 1e-3);
    }

    #[test]
    fn grid_validation() {
        assert!(LambdaGrid::new(vec![0.5], vec![0.9]).is_err());
        assert!(LambdaGrid::new(vec![1.5], vec![1.0]).is_err());
        assert!(LambdaGrid::new(vec![], vec![]).is_err());
        assert!(LambdaGrid::uniform_on(&[0.25, 0.75]).is_ok());
    }
}
