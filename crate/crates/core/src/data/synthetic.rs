//! Seeded synthetic datasets.
//!
//! Two generators cover the crate's needs: oriented gratings (an image task a
//! small CNN learns quickly but raw-pixel distance handles poorly, since each
//! sample gets a random phase) and Gaussian blobs (a vector task with known
//! geometry, used to exercise the probes directly).

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::Dataset;
use crate::linalg::Matrix;
use crate::rng;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Parameters for the oriented-grating image task.
///
/// Class `k` is a sinusoidal grating at orientation `k * pi / classes` with a
/// phase drawn uniformly per sample, plus pixel noise. Phase randomness makes
/// same-class samples far apart pixel-wise while orientation stays learnable
/// by convolution.
#[derive(Debug, Clone, Copy)]
pub struct GratingSpec {
    pub n: usize,
    pub classes: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// Spatial frequency in cycles across the image.
    pub cycles: f64,
    /// Std-dev of additive Gaussian pixel noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for GratingSpec {
    fn default() -> Self {
        Self {
            n: 512,
            classes: 4,
            channels: 1,
            height: 24,
            width: 24,
            cycles: 3.0,
            noise: 0.08,
            seed: 0,
        }
    }
}

/// Generates the grating dataset described by `spec`.
///
/// Labels are balanced (round-robin) and the sample order is then shuffled,
/// all from the seed's data stream.
pub fn gratings(spec: &GratingSpec) -> Result<Dataset> {
    if spec.classes == 0 || spec.classes > 256 {
        return Err(Error::InvalidArgument(format!(
            "class count {} out of range 1..=256",
            spec.classes
        )));
    }
    if spec.n == 0 || spec.height == 0 || spec.width == 0 || spec.channels == 0 {
        return Err(Error::InvalidArgument("empty grating spec".into()));
    }
    let mut rng = rng::seeded(rng::derive(spec.seed, rng::stream::DATA));
    let noise_dist = Normal::new(0.0, spec.noise.max(0.0)).expect("finite noise std");

    let plane = spec.height * spec.width;
    let sample_len = spec.channels * plane;
    let mut data = vec![0.0f32; spec.n * sample_len];
    let mut labels = vec![0u8; spec.n];

    for i in 0..spec.n {
        let label = (i % spec.classes) as u8;
        labels[i] = label;
        let theta = std::f64::consts::PI * label as f64 / spec.classes as f64;
        let (sin_t, cos_t) = theta.sin_cos();
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let freq = std::f64::consts::TAU * spec.cycles / spec.width.max(spec.height) as f64;

        let first = &mut data[i * sample_len..i * sample_len + plane];
        for y in 0..spec.height {
            for x in 0..spec.width {
                let proj = x as f64 * cos_t + y as f64 * sin_t;
                let mut v = 0.5 + 0.4 * (freq * proj + phase).sin();
                if spec.noise > 0.0 {
                    v += noise_dist.sample(&mut rng);
                }
                first[y * spec.width + x] = v.clamp(0.0, 1.0) as f32;
            }
        }
        // All channels carry the same pattern.
        for c in 1..spec.channels {
            let (done, rest) = data[i * sample_len..].split_at_mut(c * plane);
            rest[..plane].copy_from_slice(&done[..plane]);
        }
    }

    // Shuffle sample order so mini-batches mix classes even without the
    // trainer's own shuffle.
    let mut order: Vec<usize> = (0..spec.n).collect();
    for i in (1..spec.n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let images = Tensor::new(
        vec![spec.n, spec.channels, spec.height, spec.width],
        data,
    )?;
    let ds = Dataset::new(images, labels, spec.classes)?;
    Ok(ds.subset(&order))
}

/// Isotropic Gaussian blobs: class `k` is centered at `separation * e_k`.
///
/// Requires `dim >= classes` so every class gets its own axis. Returns points
/// as rows plus labels, balanced round-robin.
pub fn blobs(
    n: usize,
    classes: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<(Matrix, Vec<u8>)> {
    if classes == 0 || classes > 256 {
        return Err(Error::InvalidArgument(format!("class count {classes} out of range")));
    }
    if dim < classes {
        return Err(Error::InvalidArgument(format!(
            "blobs needs dim >= classes ({dim} < {classes})"
        )));
    }
    let mut rng = rng::seeded(rng::derive(seed, rng::stream::DATA));
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut data = vec![0.0f64; n * dim];
    let mut labels = vec![0u8; n];
    for i in 0..n {
        let label = i % classes;
        labels[i] = label as u8;
        let row = &mut data[i * dim..(i + 1) * dim];
        for x in row.iter_mut() {
            *x = normal.sample(&mut rng);
        }
        row[label] += separation;
    }
    Ok((Matrix::from_vec(n, dim, data)?, labels))
}
