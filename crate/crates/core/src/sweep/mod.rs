//! Hyperparameter sweeps over (grid value, seed) cells.
//!
//! Every cell trains with its own generator, `cell_stream(master_seed,
//! value_index, seed_index)`, and data are generated from `seeds[seed_index]`,
//! so results do not depend on scheduling. Cells that fail numerically are
//! recorded with a status and excluded from the aggregates.

mod output;
mod recipes;

pub use output::{aggregate_and_write, aggregate_csv, config_hash, raw_csv, sha256_hex, FileEntry, Manifest, AGGREGATE_FILE, MANIFEST_FILE, RAW_FILE};
pub use recipes::{initial_model, prepare_data, CifarFiles, DataConfig, MnistFiles, PreparedData};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::weight_norm_split;
use crate::losses::{LossSpec, MixingDistribution};
use crate::rng::cell_stream;
use crate::train::{fit_with_rng, AdamWConfig, Optimizer, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    WeightDecay,
    LabelSmoothing,
    Mixup,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::WeightDecay, Method::LabelSmoothing, Method::Mixup];

    pub fn name(self) -> &'static str {
        match self {
            Method::WeightDecay => "weight_decay",
            Method::LabelSmoothing => "label_smoothing",
            Method::Mixup => "mixup",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown method {s:?}; expected weight_decay, label_smoothing or mixup")))
    }

    /// Loss and decoupled weight decay for one grid value. Mixup values are
    /// Beta(a, a) parameters, with 0 meaning plain training.
    pub fn setting(self, value: f64, base_weight_decay: f64) -> (LossSpec, f64) {
        match self {
            Method::WeightDecay => (LossSpec::cross_entropy(), value),
            Method::LabelSmoothing => (LossSpec::label_smoothing(value), base_weight_decay),
            Method::Mixup if value == 0.0 => (LossSpec::mixup(MixingDistribution::PointMass { lambda: 1.0 }), base_weight_decay),
            Method::Mixup => (LossSpec::mixup(MixingDistribution::Beta { a: value, b: value }), base_weight_decay),
        }
    }

    /// The 20-point grid used for this method in the linear experiments.
    pub fn default_range(self) -> (f64, f64) {
        match self {
            Method::WeightDecay => (0.0, 0.1),
            Method::LabelSmoothing => (0.0, 0.75),
            Method::Mixup => (0.0, 8.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Recipe {
    #[serde(rename = "defC1")]
    DefC1,
    #[serde(rename = "spurious_binary")]
    SpuriousBinary,
    #[serde(rename = "colored_multiclass")]
    ColoredMulticlass,
    #[serde(rename = "boundary2d")]
    Boundary2d,
}

impl Recipe {
    pub const ALL: [Recipe; 4] = [Recipe::DefC1, Recipe::SpuriousBinary, Recipe::ColoredMulticlass, Recipe::Boundary2d];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::DefC1 => "defC1",
            Recipe::SpuriousBinary => "spurious_binary",
            Recipe::ColoredMulticlass => "colored_multiclass",
            Recipe::Boundary2d => "boundary2d",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Recipe::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::config(format!("unknown recipe {s:?}")))
    }

    /// Training defaults pinned for each experiment.
    pub fn train_defaults(self) -> TrainConfig {
        let (epochs, batch_size, learning_rate) = match self {
            Recipe::DefC1 => (100, 500, 5e-3),
            Recipe::SpuriousBinary => (200, 1024, 5e-3),
            Recipe::ColoredMulticlass => (20, 1024, 5e-3),
            Recipe::Boundary2d => (5000, 500, 1e-2),
        };
        TrainConfig {
            epochs,
            batch_size,
            learning_rate,
            adamw: AdamWConfig::default(),
            optimizer: Optimizer::AdamW,
            seed: 0,
            diagnostics_every: epochs.max(1),
        }
    }
}

pub const DEFAULT_SEEDS: [u64; 5] = [11, 22, 33, 44, 55];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub method: Method,
    pub grid: Vec<f64>,
    /// Data seeds; one cell per (grid value, seed).
    pub seeds: Vec<u64>,
    /// Keys the per-cell training streams.
    pub master_seed: u64,
    pub experiment: Recipe,
    /// `train.seed` is unused: each cell draws from its own stream.
    pub train: TrainConfig,
    /// Decay added to label smoothing and Mixup cells.
    #[serde(default)]
    pub base_weight_decay: f64,
    #[serde(default)]
    pub data: DataConfig,
}

impl SweepConfig {
    /// The pinned protocol of `recipe` with the 20-point grid for `method`.
    pub fn for_recipe(recipe: Recipe, method: Method) -> Self {
        let (lo, hi) = method.default_range();
        SweepConfig {
            method,
            grid: plan_grid(method, lo, hi, 20).expect("static range"),
            seeds: DEFAULT_SEEDS.to_vec(),
            master_seed: 0,
            experiment: recipe,
            train: recipe.train_defaults(),
            base_weight_decay: 0.0,
            data: DataConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() || self.seeds.is_empty() {
            return Err(Error::config("sweep grid and seed list must be non-empty"));
        }
        for &v in &self.grid {
            check_value(self.method, v)?;
        }
        if !(self.base_weight_decay >= 0.0 && self.base_weight_decay.is_finite()) {
            return Err(Error::config(format!("base weight decay must be non-negative, got {}", self.base_weight_decay)));
        }
        self.train.validate()
    }
}

fn check_value(method: Method, v: f64) -> Result<()> {
    let ok = match method {
        Method::WeightDecay | Method::Mixup => v >= 0.0 && v.is_finite(),
        Method::LabelSmoothing => (0.0..=1.0).contains(&v),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::config(format!("grid value {v} is invalid for {}", method.name())))
    }
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn plan_grid(method: Method, lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 || !(lo <= hi) {
        return Err(Error::config(format!("cannot plan {count} values on [{lo}, {hi}]")));
    }
    let grid: Vec<f64> = if count == 1 {
        vec![lo]
    } else {
        (0..count)
            .map(|i| if i + 1 == count { hi } else { lo + (hi - lo) * i as f64 / (count - 1) as f64 })
            .collect()
    };
    for &v in &grid {
        check_value(method, v)?;
    }
    Ok(grid)
}

/// Column order of the per-cell metrics in every output.
pub const METRICS: [&str; 8] = [
    "test_error",
    "train_loss",
    "norm_high",
    "norm_low",
    "norm_ratio",
    "output_variance",
    "target_output_variance",
    "activation_variance",
];

/// Final metrics of one trained model; norms only exist for linear models
/// and activation variance only for MLPs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub test_error: f64,
    pub train_loss: f64,
    pub norm_high: Option<f64>,
    pub norm_low: Option<f64>,
    pub norm_ratio: Option<f64>,
    pub output_variance: f64,
    pub target_output_variance: Option<f64>,
    pub activation_variance: Option<f64>,
}

impl CellMetrics {
    pub fn values(&self) -> [Option<f64>; 8] {
        [
            Some(self.test_error),
            Some(self.train_loss),
            self.norm_high,
            self.norm_low,
            self.norm_ratio,
            Some(self.output_variance),
            self.target_output_variance,
            self.activation_variance,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub value_index: usize,
    pub value: f64,
    pub seed_index: usize,
    pub seed: u64,
    /// `None` when training failed; see `error`.
    pub metrics: Option<CellMetrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub value_index: usize,
    pub value: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    /// Mean and population standard deviation per entry of [`METRICS`], over
    /// successful cells reporting the metric.
    pub mean: Vec<Option<f64>>,
    pub std: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    /// Ordered by value index, then seed index.
    pub cells: Vec<CellResult>,
    pub aggregates: Vec<AggregateRow>,
}

impl SweepResult {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Numeric(format!("cannot serialise sweep result: {e}")))
    }

    /// Mean of `metric` at each grid value.
    pub fn means(&self, metric: &str) -> Result<Vec<Option<f64>>> {
        let j = METRICS
            .iter()
            .position(|&m| m == metric)
            .ok_or_else(|| Error::config(format!("unknown metric {metric:?}")))?;
        Ok(self.aggregates.iter().map(|a| a.mean[j]).collect())
    }
}

fn run_cell(cfg: &SweepConfig, data: &PreparedData, value_index: usize, seed_index: usize) -> CellResult {
    let value = cfg.grid[value_index];
    let mut rng = cell_stream(cfg.master_seed, value_index, seed_index);
    let (spec, weight_decay) = cfg.method.setting(value, cfg.base_weight_decay);
    let mut train_cfg = cfg.train.clone();
    train_cfg.adamw.weight_decay = weight_decay;
    train_cfg.diagnostics_every = train_cfg.epochs.max(1);
    let outcome = initial_model(cfg.experiment, &cfg.data, &data.train, &mut rng)
        .and_then(|model| fit_with_rng(model, &data.train, &data.test, &spec, &train_cfg, &mut rng))
        .and_then(|report| {
            let last = report.history.last().expect("history is never empty");
            let sample = report.samples.last().expect("samples are never empty");
            let split = match report.model.as_linear() {
                Some(m) => Some(weight_norm_split(m.w(), &data.train.low_var_dims)?),
                None => None,
            };
            Ok(CellMetrics {
                test_error: last.test_error,
                train_loss: last.train_loss,
                norm_high: split.map(|s| s.norm_high),
                norm_low: split.map(|s| s.norm_low),
                norm_ratio: split.map(|s| s.ratio_first),
                output_variance: sample.output_variance.per_class_total_variance,
                target_output_variance: sample.output_variance.target_output_variance,
                activation_variance: sample.activation_variance,
            })
        });
    let seed = cfg.seeds[seed_index];
    match outcome {
        Ok(m) => CellResult {
            value_index,
            value,
            seed_index,
            seed,
            metrics: Some(m),
            error: None,
        },
        Err(e) => CellResult {
            value_index,
            value,
            seed_index,
            seed,
            metrics: None,
            error: Some(e.to_string()),
        },
    }
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

/// Aggregates cells (ordered by value, then seed) per grid value.
pub fn aggregate(grid: &[f64], cells: &[CellResult]) -> Vec<AggregateRow> {
    grid.iter()
        .enumerate()
        .map(|(vi, &value)| {
            let group: Vec<&CellResult> = cells.iter().filter(|c| c.value_index == vi).collect();
            let ok: Vec<&CellMetrics> = group.iter().filter_map(|c| c.metrics.as_ref()).collect();
            let (mut mean, mut std) = (Vec::new(), Vec::new());
            for j in 0..METRICS.len() {
                let xs: Vec<f64> = ok.iter().filter_map(|m| m.values()[j]).collect();
                let (m, s) = mean_std(&xs);
                mean.push(m);
                std.push(s);
            }
            AggregateRow {
                value_index: vi,
                value,
                n_ok: ok.len(),
                n_failed: group.len() - ok.len(),
                mean,
                std,
            }
        })
        .collect()
}

/// Runs every cell of `cfg` on `jobs` worker threads (1 runs inline). The
/// result is identical for any `jobs`.
pub fn run_sweep(cfg: &SweepConfig, jobs: usize) -> Result<SweepResult> {
    cfg.validate()?;
    if jobs == 0 {
        return Err(Error::config("jobs must be at least 1"));
    }
    let pool = if jobs > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| Error::config(format!("cannot start {jobs} workers: {e}")))?,
        )
    } else {
        None
    };
    let mut cells = Vec::with_capacity(cfg.grid.len() * cfg.seeds.len());
    for (si, &seed) in cfg.seeds.iter().enumerate() {
        let data = prepare_data(cfg.experiment, &cfg.data, seed)?;
        let run = |vi: usize| run_cell(cfg, &data, vi, si);
        let column: Vec<CellResult> = match &pool {
            Some(p) => p.install(|| (0..cfg.grid.len()).into_par_iter().map(run).collect()),
            None => (0..cfg.grid.len()).map(run).collect(),
        };
        cells.extend(column);
    }
    cells.sort_by_key(|c| (c.value_index, c.seed_index));
    let aggregates = aggregate(&cfg.grid, &cells);
    Ok(SweepResult {
        config: cfg.clone(),
        cells,
        aggregates,
    })
}
