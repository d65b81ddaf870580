//! Layer-by-layer separability analysis for small convolutional networks.
//!
//! `layerprobe` trains a CNN from scratch (explicit backprop, no autograd, no
//! BLAS) and then treats each layer's activations as a representation in its
//! own right: how well can the classes be separated there, how many dimensions
//! do they occupy, and how far do samples sit from the decision boundary?
//!
//! The crate is organised around that pipeline:
//!
//! - [`data`]: CIFAR-10 binary batches and seeded synthetic datasets.
//! - [`preprocess`]: per-image contrast normalization and ZCA whitening.
//! - [`nn`]: the network itself: layers, backprop, SGD, and a finite
//!   difference gradient audit.
//! - [`train`]: a deterministic mini-batch training loop.
//! - [`probe`]: per-layer measurements: exact kNN, a linear probe, an SVM
//!   trained by SMO, PCA / local intrinsic dimension, and decision-boundary
//!   margins.
//! - [`linalg`]: the f64 matrix kit backing the probes (symmetric Jacobi
//!   eigendecomposition, covariance).
//! - [`io`]: little-endian tensor and model containers plus report files,
//!   the formats downstream tooling consumes.
//!
//! Everything is seeded: the same seed produces bit-identical weights,
//! metrics, and artifacts.

pub mod data;
pub mod io;
pub mod linalg;
pub mod nn;
pub mod preprocess;
pub mod probe;
pub mod report;
pub mod rng;
pub mod tensor;
pub mod train;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// Malformed file contents (bad magic, truncation, version mismatch, ...).
    #[error("format error: {0}")]
    Format(String),
    /// Tensor or matrix dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A configuration or argument value is out of its valid range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// An iterative solver hit its iteration budget.
    #[error("{0} did not converge: {1}")]
    NoConvergence(&'static str, String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub use tensor::Tensor;
