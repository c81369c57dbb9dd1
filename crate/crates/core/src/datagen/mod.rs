//! Datasets: synthetic low/high variance distributions, spurious-feature
//! transforms, and loaders for the MNIST IDX and CIFAR-10 binary formats.

mod cifar;
mod csv_io;
mod idx;
mod images;
mod synthetic;

pub use cifar::{encode_cifar10_binary, load_cifar10_binary, parse_cifar10_binary, CIFAR_RECORD_BYTES};
pub use csv_io::{read_dataset_csv, write_dataset_csv};
pub use idx::{
    encode_idx_images, encode_idx_labels, load_mnist_idx, parse_idx_images, parse_idx_labels,
    IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use images::{
    colorize_backgrounds, palette, select_binary_classes, standardize_channels, synthetic_image_standin,
    ChannelLayout, ChannelStats, StandinConfig,
};
pub use synthetic::{add_low_var_noise, inject_spurious_dim, sample_boundary_2d, sample_lowvar_highvar};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense feature matrix with integer labels.
///
/// Binary datasets carry labels in {-1, +1} with `k == 2`; multiclass datasets
/// carry labels in `0..k`. `low_var_dims` holds zero-based column indices of
/// the designated low-variance feature.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<i64>,
    pub k: usize,
    pub low_var_dims: Vec<usize>,
    pub name: String,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<i64>,
        k: usize,
        low_var_dims: Vec<usize>,
        name: impl Into<String>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 || d == 0 {
            return Err(Error::config(format!("dataset must be non-empty, got {n}x{d}")));
        }
        if labels.len() != n {
            return Err(Error::Shape(format!("{} labels for {} rows", labels.len(), n)));
        }
        if k < 2 {
            return Err(Error::config(format!("class count must be at least 2, got {k}")));
        }
        let binary = k == 2 && labels.iter().all(|&y| y == -1 || y == 1);
        if !binary {
            if let Some(&bad) = labels.iter().find(|&&y| y < 0 || y as usize >= k) {
                return Err(Error::config(format!("label {bad} outside [0, {k})")));
            }
        }
        if let Some(&bad) = low_var_dims.iter().find(|&&i| i >= d) {
            return Err(Error::config(format!("low-variance dim {bad} outside [0, {d})")));
        }
        let mut low_var_dims = low_var_dims;
        low_var_dims.sort_unstable();
        low_var_dims.dedup();
        Ok(Dataset {
            features,
            labels,
            k,
            low_var_dims,
            name: name.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    /// Binary mode: two classes encoded as -1/+1.
    pub fn is_binary(&self) -> bool {
        self.k == 2 && self.labels.iter().all(|&y| y == -1 || y == 1)
    }

    /// Class index in `0..k`; binary labels map -1 -> 0 and +1 -> 1.
    pub fn class_index(&self, row: usize) -> usize {
        label_to_class(self.labels[row], self.is_binary())
    }

    pub fn class_indices(&self) -> Vec<usize> {
        let binary = self.is_binary();
        self.labels.iter().map(|&y| label_to_class(y, binary)).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for c in self.class_indices() {
            counts[c] += 1;
        }
        counts
    }

    /// Complement of `low_var_dims`.
    pub fn high_var_dims(&self) -> Vec<usize> {
        complement(&self.low_var_dims, self.d())
    }

    pub(crate) fn require_binary(&self, op: &str) -> Result<()> {
        if self.is_binary() {
            Ok(())
        } else {
            Err(Error::Mode(format!("{op} requires a binary (+1/-1) dataset, got {}", self.name)))
        }
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let features = self.features.select(ndarray::Axis(0), rows);
        let labels = rows.iter().map(|&r| self.labels[r]).collect();
        Dataset {
            features,
            labels,
            k: self.k,
            low_var_dims: self.low_var_dims.clone(),
            name: self.name.clone(),
        }
    }
}

pub(crate) fn label_to_class(label: i64, binary: bool) -> usize {
    if binary {
        usize::from(label > 0)
    } else {
        label as usize
    }
}

pub(crate) fn complement(dims: &[usize], d: usize) -> Vec<usize> {
    (0..d).filter(|i| !dims.contains(i)).collect()
}

/// Parameters of the low/high variance synthetic distribution: the first
/// `d / 2` coordinates equal `gamma * y`, the rest are drawn uniformly from
/// `[lo * y, hi * y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub d: usize,
    pub n: usize,
    pub gamma: f64,
    pub high_range: (f64, f64),
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.high_range;
        if self.d < 2 {
            return Err(Error::config(format!("d must be at least 2, got {}", self.d)));
        }
        if self.n == 0 {
            return Err(Error::config("n must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::config(format!("high_range must satisfy 0 < lo < hi, got ({lo}, {hi})")));
        }
        Ok(())
    }
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            d: 10,
            n: 5000,
            gamma: 0.1,
            high_range: (1.0, 100.0),
            seed: 0,
        }
    }
}

/// Raw 8-bit images in planar (channel-major) layout: each row of `pixels`
/// holds all `height * width` values of channel 0, then channel 1, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDataset {
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
    pub k: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageDataset {
    pub fn new(
        pixels: Vec<u8>,
        labels: Vec<u8>,
        k: usize,
        height: usize,
        width: usize,
        channels: usize,
    ) -> Result<Self> {
        let per = height * width * channels;
        if per == 0 {
            return Err(Error::config("image dimensions must be positive"));
        }
        if pixels.len() != labels.len() * per {
            return Err(Error::Shape(format!(
                "pixel buffer of {} bytes does not hold {} images of {per} values",
                pixels.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y as usize >= k) {
            return Err(Error::config(format!("image label {bad} outside [0, {k})")));
        }
        Ok(ImageDataset {
            pixels,
            labels,
            k,
            height,
            width,
            channels,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn values_per_image(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let per = self.values_per_image();
        &self.pixels[i * per..(i + 1) * per]
    }

    /// Multiclass dataset with pixels multiplied by `scale`.
    pub fn to_dataset(&self, scale: f64, name: &str) -> Result<Dataset> {
        let per = self.values_per_image();
        let features = Array2::from_shape_fn((self.n(), per), |(i, j)| self.pixels[i * per + j] as f64 * scale);
        Dataset::new(
            features,
            self.labels.iter().map(|&y| y as i64).collect(),
            self.k,
            Vec::new(),
            name,
        )
    }

    /// The first `count` images (or all of them).
    pub fn take(&self, count: usize) -> ImageDataset {
        let count = count.min(self.n());
        let per = self.values_per_image();
        ImageDataset {
            pixels: self.pixels[..count * per].to_vec(),
            labels: self.labels[..count].to_vec(),
            ..self.clone()
        }
    }
}
