use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay coefficient; each step first scales parameters by
    /// `1 - lr * weight_decay`.
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0
            && self.weight_decay.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid AdamW settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One AdamW update with bias-corrected moments.
pub fn adamw_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64, cfg: &AdamWConfig) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::Shape(format!(
            "{} params, {} grads, state of length {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("non-finite gradient at parameter {i}")));
    }
    state.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
    let decay = 1.0 - lr * cfg.weight_decay;
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(state.m.iter_mut()).zip(state.v.iter_mut()) {
        *p *= decay;
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

/// Plain gradient step with the same multiplicative decay as [`adamw_step`];
/// for SGD the two forms of weight decay coincide.
pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64, weight_decay: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Shape(format!("{} params, {} grads", params.len(), grads.len())));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("non-finite gradient at parameter {i}")));
    }
    let decay = 1.0 - lr * weight_decay;
    for (p, &g) in params.iter_mut().zip(grads) {
        *p = *p * decay - lr * g;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grad_no_decay_is_identity() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(2);
        adamw_step(&mut p, &[0.0, 0.0], &mut s, 0.1, &AdamWConfig::default()).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn zero_grad_decay_scales_exactly() {
        let cfg = AdamWConfig { weight_decay: 0.5, ..Default::default() };
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(2);
        for _ in 0..3 {
            adamw_step(&mut p, &[0.0, 0.0], &mut s, 0.1, &cfg).unwrap();
        }
        let f = 0.95f64 * 0.95 * 0.95;
        assert_eq!(p, vec![f, -2.0 * f]);
    }

    #[test]
    fn first_step_is_signed_learning_rate() {
        for g in [3.0, -0.02, 1e3] {
            let mut p = vec![0.0];
            let mut s = AdamState::new(1);
            adamw_step(&mut p, &[g], &mut s, 1e-3, &AdamWConfig::default()).unwrap();
            assert!((p[0] + 1e-3 * f64::signum(g)).abs() <= 1e-3 * 1e-6, "{}", p[0]);
        }
    }

    #[test]
    fn rejects_non_finite_gradients() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        assert!(matches!(adamw_step(&mut p, &[f64::INFINITY], &mut s, 1e-3, &AdamWConfig::default()), Err(Error::Numeric(_))));
    }

    #[test]
    fn sgd_step_matches_closed_form() {
        let mut p = vec![1.0, -1.0];
        sgd_step(&mut p, &[0.5, 0.25], 0.1, 0.2).unwrap();
        assert_eq!(p, vec![0.98 - 0.05, -0.98 - 0.025]);
    }
}
