use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, ImageDataset};
use crate::rng::seeded;
use crate::{Error, Result};

/// `k` distinct RGB colours with every channel in `[1, max_intensity]`,
/// drawn deterministically from `seed`.
pub fn palette(k: usize, max_intensity: u8, seed: u64) -> Result<Vec<[u8; 3]>> {
    let m = max_intensity as usize;
    let capacity = m * m * m;
    if k > capacity {
        return Err(Error::config(format!(
            "palette exhausted: {k} classes but only {capacity} colours with channels in [1, {m}]"
        )));
    }
    let mut rng = seeded(seed);
    if capacity <= 1 << 16 {
        let mut all: Vec<[u8; 3]> = Vec::with_capacity(capacity);
        for r in 1..=max_intensity {
            for g in 1..=max_intensity {
                for b in 1..=max_intensity {
                    all.push([r, g, b]);
                }
            }
        }
        all.shuffle(&mut rng);
        all.truncate(k);
        return Ok(all);
    }
    let mut colors: Vec<[u8; 3]> = Vec::with_capacity(k);
    while colors.len() < k {
        let c = [
            rng.random_range(1..=max_intensity),
            rng.random_range(1..=max_intensity),
            rng.random_range(1..=max_intensity),
        ];
        if !colors.contains(&c) {
            colors.push(c);
        }
    }
    Ok(colors)
}

/// Turns grayscale digits into RGB images whose zero-valued (background)
/// pixels carry a per-class colour. Foreground values are replicated across
/// the three channels. With `permute`, class `c` receives the colour of class
/// `c + 1 (mod k)`, so no class keeps its unpermuted colour.
pub fn colorize_backgrounds(ds: &ImageDataset, max_intensity: u8, permute: bool, seed: u64) -> Result<ImageDataset> {
    if ds.channels != 1 {
        return Err(Error::config(format!("colorize_backgrounds expects grayscale input, got {} channels", ds.channels)));
    }
    let colors = palette(ds.k, max_intensity, seed)?;
    let shift = usize::from(permute);
    let plane = ds.height * ds.width;
    let mut pixels = Vec::with_capacity(ds.n() * plane * 3);
    for i in 0..ds.n() {
        let color = colors[(ds.labels[i] as usize + shift) % ds.k];
        let img = ds.image(i);
        for &bg in &color {
            pixels.extend(img.iter().map(|&v| if v == 0 { bg } else { v }));
        }
    }
    ImageDataset::new(pixels, ds.labels.clone(), ds.k, ds.height, ds.width, 3)
}

/// Keeps two classes and relabels them -1 (`neg_class`) and +1 (`pos_class`).
/// Pixels are cast to reals unchanged.
pub fn select_binary_classes(ds: &ImageDataset, neg_class: u8, pos_class: u8) -> Result<Dataset> {
    if neg_class == pos_class {
        return Err(Error::config(format!("negative and positive class are both {neg_class}")));
    }
    for c in [neg_class, pos_class] {
        if !ds.labels.contains(&c) {
            return Err(Error::config(format!("class {c} is not present in the image dataset")));
        }
    }
    let rows: Vec<usize> = (0..ds.n()).filter(|&i| ds.labels[i] == neg_class || ds.labels[i] == pos_class).collect();
    let per = ds.values_per_image();
    let mut features = Array2::zeros((rows.len(), per));
    let mut labels = Vec::with_capacity(rows.len());
    for (mut out, &i) in features.rows_mut().into_iter().zip(&rows) {
        for (o, &p) in out.iter_mut().zip(ds.image(i)) {
            *o = p as f64;
        }
        labels.push(if ds.labels[i] == pos_class { 1 } else { -1 });
    }
    Dataset::new(features, labels, 2, Vec::new(), format!("binary({neg_class} vs {pos_class})"))
}

/// How feature columns map onto image channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelLayout {
    /// Channel-major: each channel occupies a contiguous block of columns.
    Planar { channels: usize },
    /// Pixel-major: column `j` belongs to channel `j % channels`.
    Interleaved { channels: usize },
}

impl ChannelLayout {
    fn channels(self) -> usize {
        match self {
            ChannelLayout::Planar { channels } | ChannelLayout::Interleaved { channels } => channels,
        }
    }

    fn channel_of(self, col: usize, d: usize) -> usize {
        match self {
            ChannelLayout::Planar { channels } => col / (d / channels),
            ChannelLayout::Interleaved { channels } => col % channels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Channels whose training variance was zero; they were divided by 1.
    pub zero_variance: Vec<bool>,
}

/// Per-channel standardisation with statistics taken from `train` only.
pub fn standardize_channels(train: &Dataset, test: &Dataset, layout: ChannelLayout) -> Result<(Dataset, Dataset, ChannelStats)> {
    let d = train.d();
    let channels = layout.channels();
    if test.d() != d {
        return Err(Error::Shape(format!("train has {d} features, test has {}", test.d())));
    }
    if channels == 0 || d % channels != 0 {
        return Err(Error::config(format!("{d} features cannot be split into {channels} channels")));
    }
    let mut sum = vec![0.0; channels];
    let mut count = vec![0usize; channels];
    for row in train.features.rows() {
        for (j, &v) in row.iter().enumerate() {
            let c = layout.channel_of(j, d);
            sum[c] += v;
            count[c] += 1;
        }
    }
    let mean: Vec<f64> = sum.iter().zip(&count).map(|(s, &n)| s / n as f64).collect();
    let mut sq = vec![0.0; channels];
    for row in train.features.rows() {
        for (j, &v) in row.iter().enumerate() {
            let c = layout.channel_of(j, d);
            sq[c] += (v - mean[c]).powi(2);
        }
    }
    let raw_std: Vec<f64> = sq.iter().zip(&count).map(|(s, &n)| (s / n as f64).sqrt()).collect();
    let zero_variance: Vec<bool> = raw_std.iter().map(|&s| s == 0.0).collect();
    let std: Vec<f64> = raw_std.iter().map(|&s| if s == 0.0 { 1.0 } else { s }).collect();
    let apply = |ds: &Dataset| {
        let mut out = ds.clone();
        for mut row in out.features.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                let c = layout.channel_of(j, d);
                *v = (*v - mean[c]) / std[c];
            }
        }
        out
    };
    let (train, test) = (apply(train), apply(test));
    Ok((train, test, ChannelStats { mean, std, zero_variance }))
}

/// Parameters for a synthetic stand-in for a natural-image classification
/// set: each class has a fixed random template, and images are the template
/// scaled by `signal` plus i.i.d. Gaussian noise, centred at 128 and clipped
/// to 8 bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandinConfig {
    pub n_per_class: usize,
    pub classes: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub signal: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for StandinConfig {
    fn default() -> Self {
        StandinConfig {
            n_per_class: 5000,
            classes: 2,
            height: 32,
            width: 32,
            channels: 3,
            signal: 4.0,
            noise: 48.0,
            seed: 0,
        }
    }
}

pub fn synthetic_image_standin(cfg: &StandinConfig) -> Result<ImageDataset> {
    if cfg.classes < 2 || cfg.classes > 256 {
        return Err(Error::config(format!("stand-in needs 2..=256 classes, got {}", cfg.classes)));
    }
    let per = cfg.height * cfg.width * cfg.channels;
    // Templates come from a stream independent of the sample seed so that
    // train and test splits drawn with different seeds share class structure.
    let mut template_rng = seeded(0x7e3a_11c5);
    let templates: Vec<Vec<f64>> = (0..cfg.classes)
        .map(|_| (0..per).map(|_| template_rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let mut rng = seeded(cfg.seed);
    let n = cfg.n_per_class * cfg.classes;
    let mut labels: Vec<u8> = (0..n).map(|i| (i % cfg.classes) as u8).collect();
    labels.shuffle(&mut rng);
    let mut pixels = Vec::with_capacity(n * per);
    for &y in &labels {
        let t = &templates[y as usize];
        pixels.extend(t.iter().map(|&tv| {
            let z: f64 = rng.sample(StandardNormal);
            (128.0 + cfg.signal * tv + cfg.noise * z).round().clamp(0.0, 255.0) as u8
        }));
    }
    ImageDataset::new(pixels, labels, cfg.classes, cfg.height, cfg.width, cfg.channels)
}
