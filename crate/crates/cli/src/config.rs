//! Effective configuration: built-in defaults, then the JSON file, then flags.

use std::path::{Path, PathBuf};

use clap::Args;
use labelaug::sweep::{CifarFiles, Method, MnistFiles, Recipe, SweepConfig};
use labelaug::train::Optimizer;
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON file overriding the recipe defaults; any subset of the keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// defC1, spurious_binary, colored_multiclass or boundary2d.
    #[arg(long)]
    pub recipe: Option<String>,
    /// weight_decay, label_smoothing or mixup.
    #[arg(long)]
    pub method: Option<String>,
    /// Master seed of the training streams.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// adam_w or sgd.
    #[arg(long)]
    pub optimizer: Option<String>,
    /// Decoupled decay applied alongside label smoothing and Mixup.
    #[arg(long)]
    pub base_weight_decay: Option<f64>,
    /// Training sample size of the synthetic recipes.
    #[arg(long)]
    pub n: Option<usize>,
    /// Noise width on the low-variance dims (defC1).
    #[arg(long)]
    pub low_var_noise: Option<f64>,
    /// Directory holding the four MNIST IDX files.
    #[arg(long)]
    pub mnist_dir: Option<PathBuf>,
    /// Directory holding the CIFAR-10 binary batches.
    #[arg(long)]
    pub cifar_dir: Option<PathBuf>,
    #[arg(long)]
    pub max_train: Option<usize>,
    #[arg(long)]
    pub max_test: Option<usize>,
    /// Hidden width of the multiclass MLP.
    #[arg(long)]
    pub hidden: Option<usize>,
}

pub fn read_json(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{} is not valid JSON: {e}", path.display())))
}

/// Recursively overlays `top` onto `base`; non-object values replace.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn named<T>(flag: Option<&str>, file: Option<&Value>, key: &str, parse: fn(&str) -> labelaug::Result<T>) -> CliResult<T> {
    let from_file = file.and_then(|v| v.get(key)).and_then(Value::as_str);
    match flag.or(from_file) {
        Some(s) => Ok(parse(s)?),
        None => Err(CliError::Config(format!("--{} is required (or set \"{key}\" in the config file)", key.replace("experiment", "recipe")))),
    }
}

pub fn cifar_files(dir: &Path) -> CliResult<CifarFiles> {
    let train: Vec<PathBuf> = (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).filter(|p| p.exists()).collect();
    if train.is_empty() {
        return Err(CliError::Config(format!("no data_batch_*.bin files in {}", dir.display())));
    }
    Ok(CifarFiles {
        train,
        test: vec![dir.join("test_batch.bin")],
    })
}

impl RunArgs {
    pub fn sweep_config(&self) -> CliResult<SweepConfig> {
        let file = self.config.as_deref().map(read_json).transpose()?;
        let recipe = named(self.recipe.as_deref(), file.as_ref(), "experiment", Recipe::parse)?;
        let method = named(self.method.as_deref(), file.as_ref(), "method", Method::parse)?;
        let mut value = serde_json::to_value(SweepConfig::for_recipe(recipe, method)).expect("config serialises");
        if let Some(f) = file {
            merge(&mut value, f);
        }
        let mut cfg: SweepConfig =
            serde_json::from_value(value).map_err(|e| CliError::Config(format!("config file does not match the schema: {e}")))?;
        cfg.experiment = recipe;
        cfg.method = method;
        self.apply(&mut cfg)?;
        Ok(cfg)
    }

    fn apply(&self, cfg: &mut SweepConfig) -> CliResult<()> {
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        if let Some(b) = self.batch_size {
            cfg.train.batch_size = b;
        }
        if let Some(lr) = self.lr {
            cfg.train.learning_rate = lr;
        }
        if let Some(o) = &self.optimizer {
            cfg.train.optimizer = match o.as_str() {
                "adam_w" | "adamw" => Optimizer::AdamW,
                "sgd" => Optimizer::Sgd,
                _ => return Err(CliError::Config(format!("unknown optimizer {o:?}; expected adam_w or sgd"))),
            };
        }
        if let Some(w) = self.base_weight_decay {
            cfg.base_weight_decay = w;
        }
        if let Some(n) = self.n {
            match cfg.experiment {
                Recipe::Boundary2d => cfg.data.boundary_n = n,
                _ => cfg.data.synthetic.n = n,
            }
        }
        if let Some(w) = self.low_var_noise {
            cfg.data.low_var_noise = w;
        }
        if let Some(d) = &self.mnist_dir {
            cfg.data.mnist = Some(MnistFiles::in_dir(d));
        }
        if let Some(d) = &self.cifar_dir {
            cfg.data.cifar = Some(cifar_files(d)?);
        }
        if self.max_train.is_some() {
            cfg.data.max_train = self.max_train;
        }
        if self.max_test.is_some() {
            cfg.data.max_test = self.max_test;
        }
        if let Some(h) = self.hidden {
            cfg.data.hidden = h;
        }
        Ok(())
    }
}
