//! Input preprocessing: per-image contrast normalization and ZCA whitening.
//!
//! The usual pipeline for raw pixels is contrast-normalize each image, then
//! fit a [`ZcaWhitener`] on the training set and apply it to every split.
//! ZCA is the symmetric whitening `W = V diag(1/sqrt(l + eps)) V^T` built
//! from the covariance eigendecomposition; among all whitenings it is the one
//! that stays closest to the original pixels, so whitened images still look
//! like images.

use crate::data::Dataset;
use crate::linalg::{covariance, sym_eigen, Matrix};
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Standardizes each sample in place: subtract its mean, divide by
/// `sqrt(var + eps)` (biased variance). Flat images keep a zero pattern
/// instead of blowing up, thanks to `eps`.
pub fn contrast_normalize(images: &mut Tensor, eps: f32) {
    let n = images.batch();
    let len = images.sample_len();
    if len == 0 {
        return;
    }
    let data = images.data_mut();
    for i in 0..n {
        let row = &mut data[i * len..(i + 1) * len];
        let mean = row.iter().sum::<f32>() / len as f32;
        let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<f32>() / len as f32;
        let scale = 1.0 / (var + eps).sqrt();
        for x in row.iter_mut() {
            *x = (*x - mean) * scale;
        }
    }
}

/// ZCA whitening transform fitted to a set of points.
#[derive(Debug, Clone)]
pub struct ZcaWhitener {
    mean: Vec<f64>,
    whiten: Matrix,
    dewhiten: Matrix,
    eps: f64,
}

impl ZcaWhitener {
    /// Fits mean, covariance, and the symmetric whitening pair on `rows`
    /// (one point per row). `eps` regularizes small eigenvalues.
    pub fn fit(rows: &Matrix, eps: f64) -> Result<Self> {
        if eps <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "zca eps must be positive, got {eps}"
            )));
        }
        let (mean, cov) = covariance(rows)?;
        let eig = sym_eigen(&cov)?;
        let d = cov.rows();

        // W   = V diag((l + eps)^-1/2) V^T
        // W^-1= V diag((l + eps)^+1/2) V^T
        let inv_scale: Vec<f64> = eig
            .values
            .iter()
            .map(|&l| 1.0 / (l.max(0.0) + eps).sqrt())
            .collect();
        let fwd_scale: Vec<f64> = inv_scale.iter().map(|s| 1.0 / s).collect();

        let build = |scale: &[f64]| {
            let mut m = Matrix::zeros(d, d);
            for i in 0..d {
                for j in i..d {
                    let mut sum = 0.0;
                    for k in 0..d {
                        sum += eig.vectors.get(i, k) * scale[k] * eig.vectors.get(j, k);
                    }
                    m.set(i, j, sum);
                    m.set(j, i, sum);
                }
            }
            m
        };

        Ok(Self {
            mean,
            whiten: build(&inv_scale),
            dewhiten: build(&fwd_scale),
            eps,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// The symmetric whitening matrix `W`.
    pub fn matrix(&self) -> &Matrix {
        &self.whiten
    }

    /// Whitens points given as rows: `(x - mean) W` (W is symmetric).
    pub fn transform(&self, rows: &Matrix) -> Result<Matrix> {
        self.apply(rows, &self.whiten, true)
    }

    /// Maps whitened points back: `z W^-1 + mean`.
    pub fn inverse_transform(&self, rows: &Matrix) -> Result<Matrix> {
        self.apply(rows, &self.dewhiten, false)
    }

    fn apply(&self, rows: &Matrix, m: &Matrix, forward: bool) -> Result<Matrix> {
        let d = self.dim();
        if rows.cols() != d {
            return Err(Error::Shape(format!(
                "whitener fitted on dim {d}, got points of dim {}",
                rows.cols()
            )));
        }
        let n = rows.rows();
        let mut out = Matrix::zeros(n, d);
        let mut buf = vec![0.0f64; d];
        for i in 0..n {
            if forward {
                for (b, (&x, &mu)) in buf.iter_mut().zip(rows.row(i).iter().zip(&self.mean)) {
                    *b = x - mu;
                }
            } else {
                buf.copy_from_slice(rows.row(i));
            }
            // m is symmetric, so row-times-matrix equals matrix-times-column.
            for j in 0..d {
                let mut sum = 0.0;
                for (k, &b) in buf.iter().enumerate() {
                    sum += b * m.get(k, j);
                }
                let v = if forward { sum } else { sum + self.mean[j] };
                out.set(i, j, v);
            }
        }
        Ok(out)
    }

    /// Whitens a dataset's images in place (f32 in, f64 math, f32 out).
    pub fn apply_to_dataset(&self, dataset: &mut Dataset) -> Result<()> {
        let rows = dataset.to_rows();
        let white = self.transform(&rows)?;
        let data = dataset.images.data_mut();
        for (dst, &src) in data.iter_mut().zip(white.data()) {
            *dst = src as f32;
        }
        Ok(())
    }
}
