//! Drowsiness classification from 68-point facial landmarks.
//!
//! - [`nn`]: tensor engine (conv1d, dense, max-pool, dropout, LeakyReLU, softmax) with backprop
//! - [`landmarks`]: frame validation, per-frame min-max scaling, feature assembly, EAR
//! - [`augment`]: six-way landmark-space augmentation
//! - [`model`]: CNN and MLP builders, size audit, binary model format
//! - [`dataset`]: JSONL ingestion, split accounting, synthetic generator, subject partition
//! - [`train`], [`eval`], [`bench`]: training loop, per-category evaluation, latency benchmark

pub mod augment;
pub mod bench;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod landmarks;
pub mod model;
pub mod nn;
pub mod rng;
pub mod train;

pub use error::{Error, FormatError, Result};
