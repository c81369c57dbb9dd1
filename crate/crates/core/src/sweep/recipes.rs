//! Data and model construction for the named experiments.

use std::path::PathBuf;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Recipe;
use crate::datagen::{
    add_low_var_noise, colorize_backgrounds, inject_spurious_dim, load_cifar10_binary, load_mnist_idx, sample_boundary_2d,
    sample_lowvar_highvar, select_binary_classes, standardize_channels, synthetic_image_standin, ChannelLayout, Dataset,
    ImageDataset, StandinConfig, SyntheticConfig,
};
use crate::train::{LinearBinaryModel, MlpModel, Model};
use crate::{Error, Result};

/// Offsets that separate the test and noise streams from the train stream.
const TEST_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;
const NOISE_STREAM: u64 = 0xc2b2_ae3d_27d4_eb4f;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CifarFiles {
    pub train: Vec<PathBuf>,
    pub test: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnistFiles {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

impl MnistFiles {
    /// The standard file names inside `dir`.
    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        let dir = dir.into();
        MnistFiles {
            train_images: dir.join("train-images-idx3-ubyte"),
            train_labels: dir.join("train-labels-idx1-ubyte"),
            test_images: dir.join("test-images-idx3-ubyte"),
            test_labels: dir.join("test-labels-idx1-ubyte"),
        }
    }
}

/// Settings for every recipe; each recipe reads only its own fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// defC1 training distribution; `seed` is replaced by the cell seed.
    pub synthetic: SyntheticConfig,
    /// Width of uniform noise added to the low-variance dims (defC1).
    pub low_var_noise: f64,
    /// Test sample size for defC1 and boundary2d.
    pub test_n: usize,
    pub boundary_n: usize,
    /// spurious_binary reads these when present, else the stand-in.
    pub cifar: Option<CifarFiles>,
    /// Training split of the stand-in; `seed` is replaced by the cell seed.
    pub standin: StandinConfig,
    pub standin_test_per_class: usize,
    pub binary_classes: (u8, u8),
    pub spurious_gamma: f64,
    /// Required by colored_multiclass.
    pub mnist: Option<MnistFiles>,
    pub max_intensity: u8,
    pub hidden: usize,
    pub max_train: Option<usize>,
    pub max_test: Option<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            synthetic: SyntheticConfig::default(),
            low_var_noise: 0.0,
            test_n: 1000,
            boundary_n: 500,
            cifar: None,
            standin: StandinConfig::default(),
            standin_test_per_class: 1000,
            binary_classes: (0, 1),
            spurious_gamma: 0.1,
            mnist: None,
            max_intensity: 16,
            hidden: 2048,
            max_train: None,
            max_test: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub train: Dataset,
    pub test: Dataset,
}

fn truncate(ds: Dataset, cap: Option<usize>) -> Dataset {
    match cap {
        Some(c) if c < ds.n() => ds.subset(&(0..c).collect::<Vec<_>>()),
        _ => ds,
    }
}

fn take(ds: ImageDataset, cap: Option<usize>) -> ImageDataset {
    match cap {
        Some(c) => ds.take(c),
        None => ds,
    }
}

fn def_c1(cfg: &DataConfig, seed: u64) -> Result<PreparedData> {
    let train_cfg = SyntheticConfig { seed, ..cfg.synthetic.clone() };
    let test_cfg = SyntheticConfig {
        seed: seed ^ TEST_STREAM,
        n: cfg.test_n,
        ..cfg.synthetic.clone()
    };
    let mut train = sample_lowvar_highvar(&train_cfg)?;
    let mut test = sample_lowvar_highvar(&test_cfg)?;
    if cfg.low_var_noise > 0.0 {
        train = add_low_var_noise(&train, cfg.low_var_noise, seed ^ NOISE_STREAM)?;
        test = add_low_var_noise(&test, cfg.low_var_noise, seed ^ TEST_STREAM ^ NOISE_STREAM)?;
    }
    Ok(PreparedData { train, test })
}

fn spurious(cfg: &DataConfig, seed: u64) -> Result<PreparedData> {
    let (neg, pos) = cfg.binary_classes;
    let (train_img, test_img) = match &cfg.cifar {
        Some(files) => (load_cifar10_binary(&files.train)?, load_cifar10_binary(&files.test)?),
        None => {
            let train = StandinConfig { seed, ..cfg.standin.clone() };
            let test = StandinConfig {
                seed: seed ^ TEST_STREAM,
                n_per_class: cfg.standin_test_per_class,
                ..cfg.standin.clone()
            };
            (synthetic_image_standin(&train)?, synthetic_image_standin(&test)?)
        }
    };
    let channels = train_img.channels;
    let train = truncate(select_binary_classes(&train_img, neg, pos)?, cfg.max_train);
    let test = truncate(select_binary_classes(&test_img, neg, pos)?, cfg.max_test);
    let (train, test, _) = standardize_channels(&train, &test, ChannelLayout::Planar { channels })?;
    // Only the training inputs carry the spurious coordinate.
    let train = inject_spurious_dim(&train, cfg.spurious_gamma)?;
    Ok(PreparedData { train, test })
}

fn colored(cfg: &DataConfig, seed: u64) -> Result<PreparedData> {
    let files = cfg
        .mnist
        .as_ref()
        .ok_or_else(|| Error::config("colored_multiclass needs MNIST IDX files (data.mnist)"))?;
    let train = take(load_mnist_idx(&files.train_images, &files.train_labels)?, cfg.max_train);
    let test = take(load_mnist_idx(&files.test_images, &files.test_labels)?, cfg.max_test);
    let train = colorize_backgrounds(&train, cfg.max_intensity, false, seed)?;
    let test = colorize_backgrounds(&test, cfg.max_intensity, true, seed)?;
    let scale = 1.0 / 255.0;
    let (train, test, _) = standardize_channels(
        &train.to_dataset(scale, "colored_mnist_train")?,
        &test.to_dataset(scale, "colored_mnist_test")?,
        ChannelLayout::Planar { channels: 3 },
    )?;
    Ok(PreparedData { train, test })
}

/// Train and test data of `recipe` for one seed.
pub fn prepare_data(recipe: Recipe, cfg: &DataConfig, seed: u64) -> Result<PreparedData> {
    match recipe {
        Recipe::DefC1 => def_c1(cfg, seed),
        Recipe::Boundary2d => Ok(PreparedData {
            train: sample_boundary_2d(cfg.boundary_n, seed)?,
            test: sample_boundary_2d(cfg.test_n, seed ^ TEST_STREAM)?,
        }),
        Recipe::SpuriousBinary => spurious(cfg, seed),
        Recipe::ColoredMulticlass => colored(cfg, seed),
    }
}

/// Bias-free linear models for the binary recipes, a ReLU MLP for the
/// multiclass one.
pub fn initial_model(recipe: Recipe, cfg: &DataConfig, train: &Dataset, rng: &mut ChaCha8Rng) -> Result<Model> {
    match recipe {
        Recipe::ColoredMulticlass => {
            if cfg.hidden == 0 {
                return Err(Error::config("hidden width must be positive"));
            }
            Ok(MlpModel::uniform_init(train.d(), cfg.hidden, train.k, rng).into())
        }
        _ => Ok(LinearBinaryModel::uniform_init(train.d(), rng).into()),
    }
}
