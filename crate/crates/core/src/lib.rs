//! Numerical laboratory for label-augmentation objectives.
//!
//! The crate implements cross-entropy, label smoothing and Mixup objectives
//! (binary and multiclass) with exact gradients, the synthetic distributions
//! used to contrast them with weight decay, linear and small MLP models with
//! AdamW training, a hard-margin solver, variance diagnostics, lower-bound
//! certificates, and a deterministic hyperparameter sweep harness.

pub mod datagen;
pub mod diagnostics;
pub mod error;
pub mod losses;
mod linalg;
pub mod rng;
pub mod sweep;
pub mod train;

pub use error::{Error, Result};
