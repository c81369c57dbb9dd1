//! Models, optimisers and the training loop.
//!
//! Experiments train with AdamW, whose weight decay is decoupled from the
//! loss. Theory checks instead minimise `loss + beta/2 |w|^2` to convergence
//! with [`gd_full_batch_l2`]; the two objectives are not the same.

mod adamw;
mod gd;
mod max_margin;
mod model;

pub use adamw::{adamw_step, sgd_step, AdamState, AdamWConfig};
pub use gd::{gd_full_batch_l2, GdMethod, GdOptions, GdReport};
pub use max_margin::{max_margin_solve, MaxMarginSolution, DEFAULT_MARGIN_TOL};
pub use model::{param_vector, probabilities, Forward, LinearBinaryModel, MlpModel, Model, SoftmaxLinear, MODEL_FORMAT, MODEL_VERSION};

use ndarray::Axis;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::diagnostics::{output_variance_report, per_class_total_variance, weight_norm_split, VarianceReport, WeightNormSplit};
use crate::losses::{mix_pairs, sample_lambda, LossKind, LossSpec, Targets};
use crate::rng::seeded;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    AdamW,
    /// Plain gradient steps; `adamw.weight_decay` still sets the decay and
    /// the moment settings are ignored.
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adamw: AdamWConfig,
    #[serde(default)]
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Diagnostics are sampled at epoch 0, every `diagnostics_every` epochs,
    /// and at the final epoch.
    pub diagnostics_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 500,
            learning_rate: 5e-3,
            adamw: AdamWConfig::default(),
            optimizer: Optimizer::AdamW,
            seed: 0,
            diagnostics_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.diagnostics_every == 0 {
            return Err(Error::config("batch_size and diagnostics_every must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        self.adamw.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean objective over the epoch's batches; at epoch 0, the unaugmented
    /// loss of the initial model on the full training set.
    pub train_loss: f64,
    pub test_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSample {
    pub epoch: usize,
    /// Class-averaged total variance of hidden activations (MLPs only).
    pub activation_variance: Option<f64>,
    pub output_variance: VarianceReport,
    /// Split over the training set's low-variance dims (linear binary only).
    pub weight_norms: Option<WeightNormSplit>,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// `epochs + 1` entries; entry 0 describes the initial model.
    pub history: Vec<EpochRecord>,
    pub samples: Vec<DiagnosticSample>,
    pub model: Model,
}

impl TrainReport {
    pub fn final_test_error(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.test_error)
    }
}

fn check_compatible(model: &Model, train: &Dataset, test: &Dataset) -> Result<()> {
    if train.d() != model.input_dim() || test.d() != model.input_dim() {
        return Err(Error::Shape(format!(
            "model takes {} features, train has {}, test has {}",
            model.input_dim(),
            train.d(),
            test.d()
        )));
    }
    if train.k != model.classes() || test.k != model.classes() {
        return Err(Error::Shape(format!("model has {} classes, data has {}/{}", model.classes(), train.k, test.k)));
    }
    if matches!(model, Model::Linear(_)) {
        train.require_binary("linear binary training")?;
        test.require_binary("linear binary evaluation")?;
    }
    Ok(())
}

fn sample(model: &Model, train: &Dataset, test: &Dataset, epoch: usize) -> Result<DiagnosticSample> {
    let classes = test.class_indices();
    let fwd = model.forward(test.features.view(), true)?;
    let probs = probabilities(fwd.logits.view());
    let activation_variance = match &fwd.hidden {
        Some(h) => Some(per_class_total_variance(h.view(), &classes, test.k)?.per_class_total_variance),
        None => None,
    };
    let weight_norms = match model.as_linear() {
        Some(m) => Some(weight_norm_split(m.w(), &train.low_var_dims)?),
        None => None,
    };
    Ok(DiagnosticSample {
        epoch,
        activation_variance,
        output_variance: output_variance_report(probs.view(), &classes)?,
        weight_norms,
    })
}

/// Mini-batch training with an RNG seeded from `cfg.seed`.
pub fn fit(model: Model, train: &Dataset, test: &Dataset, spec: &LossSpec, cfg: &TrainConfig) -> Result<TrainReport> {
    fit_with_rng(model, train, test, spec, cfg, &mut seeded(cfg.seed))
}

/// [`fit`] drawing shuffles and Mixup weights from the supplied stream.
pub fn fit_with_rng(
    mut model: Model,
    train: &Dataset,
    test: &Dataset,
    spec: &LossSpec,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainReport> {
    cfg.validate()?;
    spec.validate()?;
    check_compatible(&model, train, test)?;
    let y_train = train.class_indices();
    let y_test = test.class_indices();
    let at_epoch = |e: usize, msg: Error| match msg {
        Error::Numeric(m) => Error::Numeric(format!("epoch {e}: {m}")),
        other => other,
    };

    let init_spec = if spec.is_mixup() { LossSpec::cross_entropy() } else { spec.clone() };
    let (init_loss, _) = model.loss_grad(train.features.view(), Targets::Labels(&y_train), &init_spec)?;
    let mut history = vec![EpochRecord {
        epoch: 0,
        train_loss: init_loss,
        test_error: model.error_rate(test.features.view(), &y_test)?,
    }];
    let mut samples = vec![sample(&model, train, test, 0)?];

    let mut state = AdamState::new(model.params().len());
    let mut order: Vec<usize> = (0..train.n()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = train.features.select(Axis(0), batch);
            let y: Vec<usize> = batch.iter().map(|&i| y_train[i]).collect();
            let (loss, grad) = match &spec.kind {
                LossKind::Mixup { mixing } => {
                    let lambda = sample_lambda(mixing, rng);
                    let mut perm: Vec<usize> = (0..batch.len()).collect();
                    perm.shuffle(rng);
                    let x2 = x.select(Axis(0), &perm);
                    let y2: Vec<usize> = perm.iter().map(|&p| y[p]).collect();
                    let mixed = mix_pairs(x.view(), &y, x2.view(), &y2, lambda)?;
                    model.loss_grad(mixed.features.view(), mixed.targets(), spec)
                }
                _ => model.loss_grad(x.view(), Targets::Labels(&y), spec),
            }
            .map_err(|e| at_epoch(epoch, e))?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("epoch {epoch}: non-finite loss")));
            }
            match cfg.optimizer {
                Optimizer::AdamW => adamw_step(model.params_mut(), &grad, &mut state, cfg.learning_rate, &cfg.adamw),
                Optimizer::Sgd => sgd_step(model.params_mut(), &grad, cfg.learning_rate, cfg.adamw.weight_decay),
            }
            .map_err(|e| at_epoch(epoch, e))?;
            total += loss * batch.len() as f64;
        }
        history.push(EpochRecord {
            epoch,
            train_loss: total / train.n() as f64,
            test_error: model.error_rate(test.features.view(), &y_test)?,
        });
        if epoch % cfg.diagnostics_every == 0 || epoch == cfg.epochs {
            samples.push(sample(&model, train, test, epoch)?);
        }
    }
    Ok(TrainReport { history, samples, model })
}
