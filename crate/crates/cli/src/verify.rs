//! Randomised self-checks of the library's analytic identities and bounds.

use labelaug::datagen::{sample_lowvar_highvar, SyntheticConfig};
use labelaug::diagnostics::{
    jensen_gap_check, ls_lower_bound_certificate, mixup_lower_bound_certificate, weight_norm_split, ConvexScalar,
    GroupOptimalPredictor, ScalarDistribution,
};
use labelaug::losses::{batch_loss_grad, FiniteDistribution, LambdaGrid, LossKind, LossSpec, MixingDistribution, Targets};
use labelaug::rng::seeded;
use labelaug::train::{gd_full_batch_l2, max_margin_solve, GdOptions, LinearBinaryModel, Model, DEFAULT_MARGIN_TOL};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::CliResult;

pub const SUITES: [&str; 5] = ["jensen-gap", "degeneracy", "gradients", "certificates", "low-variance"];

/// Failure messages kept per suite report.
const MAX_LISTED: usize = 20;

#[derive(Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub cases: usize,
    pub passed: usize,
    pub failures: Vec<String>,
}

struct Tally {
    cases: usize,
    passed: usize,
    failures: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Tally { cases: 0, passed: 0, failures: Vec::new() }
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if ok {
            self.passed += 1;
        } else if self.failures.len() < MAX_LISTED {
            self.failures.push(describe());
        }
    }
}

pub fn run_suite(name: &str, cases: Option<usize>, seed: u64) -> CliResult<SuiteReport> {
    let mut rng = seeded(seed);
    let mut t = Tally::new();
    match name {
        "jensen-gap" => jensen(&mut t, &mut rng, cases.unwrap_or(1000))?,
        "degeneracy" => degeneracy(&mut t, &mut rng, cases.unwrap_or(200))?,
        "gradients" => gradients(&mut t, &mut rng, cases.unwrap_or(100))?,
        "certificates" => certificates(&mut t, &mut rng, cases.unwrap_or(200))?,
        "low-variance" => low_variance(&mut t, seed, cases.unwrap_or(20))?,
        other => {
            return Err(crate::error::CliError::Config(format!(
                "unknown suite {other:?}; expected one of {} or all",
                SUITES.join(", ")
            )))
        }
    }
    Ok(SuiteReport {
        suite: name.to_string(),
        seed,
        cases: t.cases,
        passed: t.passed,
        failures: t.failures,
    })
}

fn random_phi(rng: &mut ChaCha8Rng) -> ConvexScalar {
    match rng.random_range(0..5) {
        0 => ConvexScalar::Quadratic { a: rng.random_range(0.1..5.0) },
        1 => ConvexScalar::SoftTargetCe { t: rng.random_range(0.0..=1.0) },
        2 => ConvexScalar::Softplus,
        3 => ConvexScalar::Exp,
        _ => ConvexScalar::LogCosh,
    }
}

fn random_probs(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let rest: f64 = p[1..].iter().sum();
    p[0] = 1.0 - rest;
    p
}

fn jensen(t: &mut Tally, rng: &mut ChaCha8Rng, cases: usize) -> CliResult<()> {
    for case in 0..cases {
        let m = rng.random_range(1..8);
        let values: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
        let dist = ScalarDistribution::new(values, random_probs(rng, m))?;
        // Every tenth case is the quadratic equality gap = Var(X).
        let (phi, g1, g2) = if case % 10 == 0 {
            (ConvexScalar::Quadratic { a: 1.0 }, 2.0, 2.0)
        } else {
            let phi = random_phi(rng);
            let (lo, hi) = dist.hull();
            let (a, b) = phi.curvature_range(lo, hi);
            (phi, a, b)
        };
        let c = jensen_gap_check(&phi, &dist, g1, g2)?;
        let exact = g1 != 2.0 || g2 != 2.0 || (c.gap - c.variance).abs() <= 1e-12 * c.variance.max(1.0);
        t.record(c.pass && exact, || format!("case {case}: {phi:?} gave {c:?}"));
    }
    Ok(())
}

fn random_logits(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, k), |_| rng.random_range(-6.0..6.0))
}

fn degeneracy(t: &mut Tally, rng: &mut ChaCha8Rng, cases: usize) -> CliResult<()> {
    for case in 0..cases {
        let (k, cols) = if case % 2 == 0 { (2, 1) } else { (10, 10) };
        let n = rng.random_range(1..16);
        let z = random_logits(rng, n, cols);
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let y2: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let (ce, ce_g) = batch_loss_grad(z.view(), Targets::Labels(&y), &LossSpec::cross_entropy())?;
        let (ls, ls_g) = batch_loss_grad(z.view(), Targets::Labels(&y), &LossSpec::label_smoothing(0.0))?;
        let mixed = Targets::Mixed { first: &y, second: &y2, lambda: 1.0 };
        let point = LossSpec::mixup(MixingDistribution::PointMass { lambda: 1.0 });
        let (mx, mx_g) = batch_loss_grad(z.view(), mixed, &point)?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
        let grads = ce_g.iter().zip(&ls_g).zip(&mx_g).all(|((a, b), c)| close(*a, *b) && close(*a, *c));
        t.record(close(ce, ls) && close(ce, mx) && grads, || format!("case {case}: CE {ce}, LS(0) {ls}, Mixup(1) {mx}"));
    }
    Ok(())
}

fn spec_family(i: usize) -> LossSpec {
    match i % 5 {
        0 => LossSpec::cross_entropy(),
        1 => LossSpec::label_smoothing(0.1),
        2 => LossSpec::label_smoothing(0.5),
        3 => LossSpec::mixup(MixingDistribution::PointMass { lambda: 0.25 }),
        _ => LossSpec::mixup(MixingDistribution::PointMass { lambda: 0.5 }),
    }
}

fn gradients(t: &mut Tally, rng: &mut ChaCha8Rng, cases: usize) -> CliResult<()> {
    let h = 1e-5;
    for case in 0..cases {
        for (k, cols) in [(2, 1), (10, 10)] {
            let spec = spec_family(case);
            let n = rng.random_range(1..6);
            let z = random_logits(rng, n, cols);
            let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let y2: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let targets = match spec.kind {
                LossKind::Mixup { mixing: MixingDistribution::PointMass { lambda } } => Targets::Mixed { first: &y, second: &y2, lambda },
                _ => Targets::Labels(&y),
            };
            let (_, grad) = batch_loss_grad(z.view(), targets, &spec)?;
            let mut worst = 0.0f64;
            for idx in 0..z.len() {
                let (r, c) = (idx / cols, idx % cols);
                let mut zp = z.clone();
                zp[[r, c]] += h;
                let mut zm = z.clone();
                zm[[r, c]] -= h;
                let fd = (batch_loss_grad(zp.view(), targets, &spec)?.0 - batch_loss_grad(zm.view(), targets, &spec)?.0) / (2.0 * h);
                worst = worst.max((fd - grad[[r, c]]).abs() / grad[[r, c]].abs().max(1e-3));
            }
            t.record(worst <= 1e-6, || format!("case {case} ({} classes, {}): relative error {worst:e}", k, spec.label()));
        }
    }
    Ok(())
}

fn random_distribution(rng: &mut ChaCha8Rng, k: usize) -> CliResult<FiniteDistribution> {
    let m = rng.random_range(k..=6);
    let d = rng.random_range(1..=3);
    let points = Array2::from_shape_fn((m, d), |_| rng.random_range(-2.0..2.0));
    let classes: Vec<usize> = (0..m).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
    let labels: Vec<i64> = classes.iter().map(|&c| if k == 2 { 2 * c as i64 - 1 } else { c as i64 }).collect();
    Ok(FiniteDistribution::new(points, labels, random_probs(rng, m), k)?)
}

fn certificates(t: &mut Tally, rng: &mut ChaCha8Rng, cases: usize) -> CliResult<()> {
    for case in 0..cases {
        let pi = random_distribution(rng, 2)?;
        let w: Vec<f64> = (0..pi.d()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let model = Model::from(LinearBinaryModel::from_weights(w));
        if case % 2 == 0 {
            let alpha = rng.random_range(0.0..=1.0);
            let cert = ls_lower_bound_certificate(model.predict_proba(pi.points.view())?.view(), &pi, alpha, 2)?;
            t.record(cert.satisfied, || format!("case {case}: LS alpha {alpha}: {cert:?}"));
        } else {
            let count = rng.random_range(1..=4);
            let nodes: Vec<f64> = (0..count).map(|_| rng.random_range(0.05..0.95)).collect();
            let grid = LambdaGrid::uniform_on(&nodes)?;
            let cert = mixup_lower_bound_certificate(&model, &pi, &grid)?;
            let best = mixup_lower_bound_certificate(&GroupOptimalPredictor::new(&pi, &grid)?, &pi, &grid)?;
            t.record(cert.satisfied && best.slack.abs() <= 1e-6, || {
                format!("case {case}: Mixup nodes {nodes:?}: model slack {}, optimum slack {}", cert.slack, best.slack)
            });
        }
    }
    Ok(())
}

fn low_variance(t: &mut Tally, seed: u64, datasets: usize) -> CliResult<()> {
    for i in 0..datasets {
        for d in [2, 4, 10] {
            let cfg = SyntheticConfig {
                n: 100,
                d,
                gamma: 0.05,
                high_range: (1.0, 10.0),
                seed: seed.wrapping_add(i as u64),
            };
            let ds = sample_lowvar_highvar(&cfg)?;
            let pi = FiniteDistribution::from_dataset(&ds)?;
            let mut solutions = Vec::new();
            for beta in [1e-3, 1e-2, 1e-1] {
                let spec = LossSpec::cross_entropy().with_l2(beta);
                let r = gd_full_batch_l2(&LinearBinaryModel::zeros(d), &pi, &spec, &GdOptions::default())?;
                solutions.push((format!("l2 beta {beta}"), r.model.w().to_vec()));
            }
            solutions.push(("max-margin".to_string(), max_margin_solve(&ds, DEFAULT_MARGIN_TOL)?.w));
            for (what, w) in solutions {
                let s = weight_norm_split(&w, &ds.low_var_dims)?;
                let total = s.norm_high.powi(2) + s.norm_low.powi(2);
                t.record(s.norm_high.powi(2) >= 0.5 * total, || format!("dataset {i}, d {d}, {what}: |w_H| {} |w_L| {}", s.norm_high, s.norm_low));
            }
        }
    }
    Ok(())
}
