use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::LinearBinaryModel;
use crate::linalg::solve;
use crate::losses::{binary_soft_ce, sigmoid, FiniteDistribution, LambdaGrid, LossKind, LossSpec};
use crate::{Error, Result};

/// Mixup expansions larger than this many terms are refused.
const MAX_TERMS: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GdMethod {
    /// Fixed step; `None` picks `1/L` from a smoothness bound.
    Gradient { lr: Option<f64> },
    /// Damped Newton steps with Armijo backtracking.
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdOptions {
    pub method: GdMethod,
    pub max_steps: usize,
    pub grad_tol: f64,
    /// Mixup quadrature; defaults to the discretised mixing distribution.
    pub grid: Option<LambdaGrid>,
}

impl Default for GdOptions {
    fn default() -> Self {
        GdOptions {
            method: GdMethod::Newton,
            max_steps: 1_000_000,
            grad_tol: 1e-8,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdReport {
    pub model: LinearBinaryModel,
    pub steps: usize,
    pub grad_norm: f64,
    pub objective: f64,
}

/// The population objective as a weighted sum over (possibly mixed) points:
/// `sum_r mass_r * bce(v_r . w, t_r) + beta/2 |w|^2`.
struct Objective {
    v: Array2<f64>,
    mass: Array1<f64>,
    target: Array1<f64>,
    beta: f64,
    eps: f64,
}

impl Objective {
    fn build(pi: &FiniteDistribution, spec: &LossSpec, grid: Option<&LambdaGrid>) -> Result<Self> {
        let positive: Vec<f64> = pi.labels.iter().map(|&y| if y > 0 { 1.0 } else { 0.0 }).collect();
        let (v, mass, target) = match &spec.kind {
            LossKind::Mixup { mixing } => {
                let grid = match grid {
                    Some(g) => g.clone(),
                    None => LambdaGrid::for_distribution(mixing)?,
                };
                let terms = pi.m() * pi.m() * grid.nodes.len();
                if terms > MAX_TERMS {
                    return Err(Error::config(format!("mixup expansion has {terms} terms (limit {MAX_TERMS})")));
                }
                let mut rows = Vec::with_capacity(terms * pi.d());
                let (mut mass, mut target) = (Vec::with_capacity(terms), Vec::with_capacity(terms));
                for i in 0..pi.m() {
                    for j in 0..pi.m() {
                        for (lambda, weight) in grid.iter() {
                            let m = pi.probs[i] * pi.probs[j] * weight;
                            if m == 0.0 {
                                continue;
                            }
                            let (a, b) = (pi.point(i), pi.point(j));
                            rows.extend(a.iter().zip(b).map(|(x1, x2)| lambda * x1 + (1.0 - lambda) * x2));
                            mass.push(m);
                            target.push(lambda * positive[i] + (1.0 - lambda) * positive[j]);
                        }
                    }
                }
                let v = Array2::from_shape_vec((mass.len(), pi.d()), rows).map_err(|e| Error::Shape(e.to_string()))?;
                (v, mass, target)
            }
            kind => {
                let alpha = if let LossKind::LabelSmoothing { alpha } = kind { *alpha } else { 0.0 };
                let target = positive.iter().map(|p| p * (1.0 - alpha) + alpha / 2.0).collect();
                (pi.points.clone(), pi.probs.clone(), target)
            }
        };
        Ok(Objective {
            v,
            mass: Array1::from(mass),
            target: Array1::from(target),
            beta: spec.l2_beta,
            eps: spec.output_clamp_eps,
        })
    }

    fn value(&self, w: ArrayView1<f64>) -> f64 {
        let z = self.v.dot(&w);
        let data: f64 = z.iter().zip(&self.mass).zip(&self.target).map(|((&z, &m), &t)| m * binary_soft_ce(z, t, self.eps)).sum();
        data + 0.5 * self.beta * w.dot(&w)
    }

    fn gradient(&self, w: ArrayView1<f64>) -> Array1<f64> {
        let z = self.v.dot(&w);
        let r = Array1::from_iter(z.iter().zip(&self.mass).zip(&self.target).map(|((&z, &m), &t)| m * (sigmoid(z) - t)));
        self.v.t().dot(&r) + &(&w * self.beta)
    }

    fn hessian(&self, w: ArrayView1<f64>) -> Array2<f64> {
        let z = self.v.dot(&w);
        let mut scaled = self.v.clone();
        for (mut row, (&z, &m)) in scaled.rows_mut().into_iter().zip(z.iter().zip(&self.mass)) {
            let s = sigmoid(z);
            row *= m * s * (1.0 - s);
        }
        let mut h = self.v.t().dot(&scaled);
        h.diag_mut().mapv_inplace(|d| d + self.beta);
        h
    }

    /// Upper bound on the gradient's Lipschitz constant.
    fn smoothness(&self) -> f64 {
        let second: f64 = self.v.rows().into_iter().zip(&self.mass).map(|(r, m)| m * r.dot(&r)).sum();
        0.25 * second + self.beta
    }
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

fn diverged(trace: &[f64], step: usize) -> Error {
    let tail: Vec<String> = trace.iter().rev().take(6).rev().map(|v| format!("{v:.6e}")).collect();
    Error::Numeric(format!("full-batch descent diverged at step {step}; recent objective values [{}]", tail.join(", ")))
}

/// Minimises `population loss + beta/2 |w|^2` for a bias-free linear model,
/// starting from `model`. Fails when the gradient norm does not reach
/// `grad_tol` within `max_steps`.
/// Newton direction, damped by `mu I` when the Hessian is singular (e.g.
/// duplicated columns without a penalty).
fn newton_direction(mut h: Array2<f64>, g: &Array1<f64>) -> Option<Array1<f64>> {
    let top = h.diag().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let mut mu = 0.0;
    for _ in 0..8 {
        if let Some(d) = solve(&h, g).filter(|d| d.dot(g) > 0.0 && d.iter().all(|v| v.is_finite())) {
            return Some(d);
        }
        let next = if mu == 0.0 { 1e-12 * top.max(f64::MIN_POSITIVE) } else { mu * 100.0 };
        h.diag_mut().mapv_inplace(|v| v + next - mu);
        mu = next;
    }
    None
}

pub fn gd_full_batch_l2(model: &LinearBinaryModel, pi: &FiniteDistribution, spec: &LossSpec, opts: &GdOptions) -> Result<GdReport> {
    spec.validate()?;
    if model.bias().is_some() {
        return Err(Error::config("explicit-L2 descent expects a bias-free linear model"));
    }
    if !pi.is_binary() {
        return Err(Error::Mode("explicit-L2 descent needs binary labels".into()));
    }
    if model.d() != pi.d() {
        return Err(Error::Shape(format!("model has {} weights, data has {} dims", model.d(), pi.d())));
    }
    let obj = Objective::build(pi, spec, opts.grid.as_ref())?;
    let mut w = Array1::from(model.w().to_vec());
    let mut f = obj.value(w.view());
    let start = f;
    let mut trace = vec![f];
    let lr = match opts.method {
        GdMethod::Gradient { lr: Some(lr) } => lr,
        _ => 1.0 / obj.smoothness(),
    };
    for step in 0..=opts.max_steps {
        let g = obj.gradient(w.view());
        let gn = norm(&g);
        if !gn.is_finite() {
            return Err(diverged(&trace, step));
        }
        if gn <= opts.grad_tol {
            return Ok(GdReport {
                model: LinearBinaryModel::from_weights(w.to_vec()),
                steps: step,
                grad_norm: gn,
                objective: f,
            });
        }
        if step == opts.max_steps {
            return Err(Error::Numeric(format!(
                "full-batch descent did not converge in {} steps (gradient norm {gn:.3e}, tolerance {:.1e})",
                opts.max_steps, opts.grad_tol
            )));
        }
        let direction = match opts.method {
            GdMethod::Newton => newton_direction(obj.hessian(w.view()), &g),
            GdMethod::Gradient { .. } => None,
        };
        match direction {
            Some(d) => {
                // Armijo backtracking along the Newton direction.
                let slope = d.dot(&g);
                let mut t = 1.0;
                let mut accepted = false;
                for _ in 0..60 {
                    let cand = &w - &(&d * t);
                    let fc = obj.value(cand.view());
                    if fc <= f - 1e-4 * t * slope {
                        w = cand;
                        f = fc;
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
                if !accepted {
                    // At the floating-point floor of f; a plain gradient step
                    // still reduces the gradient norm.
                    w.scaled_add(-lr, &g);
                    f = obj.value(w.view());
                }
            }
            None => {
                w.scaled_add(-lr, &g);
                f = obj.value(w.view());
            }
        }
        if !f.is_finite() || f > 1e6 * (start.abs() + 1.0) {
            trace.push(f);
            return Err(diverged(&trace, step + 1));
        }
        trace.push(f);
        if trace.len() > 64 {
            trace.drain(..32);
        }
    }
    unreachable!("loop returns at max_steps")
}
