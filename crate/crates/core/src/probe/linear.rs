//! Linear readout probe: multinomial logistic regression on frozen features.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::linalg::Matrix;
use crate::nn::{LayerSpec, Network};
use crate::tensor::Tensor;
use crate::train::{self, TrainConfig};
use crate::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearProbeConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f32,
    pub momentum: f32,
    pub weight_decay: f32,
    pub seed: u64,
}

impl Default for LinearProbeConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            batch_size: 32,
            lr: 0.1,
            momentum: 0.9,
            weight_decay: 1e-4,
            seed: 0,
        }
    }
}

/// Feature standardization fitted on the training split. Dimensions with no
/// variance pass through unscaled so constants stay harmless.
pub(crate) struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub(crate) fn fit(data: &Matrix) -> Self {
        let n = data.rows().max(1);
        let d = data.cols();
        let mut mean = vec![0.0f64; d];
        for i in 0..data.rows() {
            for (m, &v) in mean.iter_mut().zip(data.row(i)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0f64; d];
        for i in 0..data.rows() {
            for ((s, &v), &m) in var.iter_mut().zip(data.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .iter()
            .map(|&s| {
                let sd = (s / n as f64).sqrt();
                if sd > 1e-12 {
                    1.0 / sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    /// Standardized copy of `data`, rows kept in place.
    pub(crate) fn to_matrix(&self, data: &Matrix) -> Matrix {
        let (n, d) = (data.rows(), data.cols());
        let mut out = vec![0.0f64; n * d];
        for i in 0..n {
            for (j, &v) in data.row(i).iter().enumerate() {
                out[i * d + j] = (v - self.mean[j]) * self.scale[j];
            }
        }
        Matrix::from_vec(n, d, out).expect("buffer sized to shape")
    }

    /// Converts rows into a `[n, d, 1, 1]` activation tensor for training.
    fn to_tensor(&self, data: &Matrix) -> Tensor {
        let (n, d) = (data.rows(), data.cols());
        let mut out = vec![0.0f32; n * d];
        for i in 0..n {
            for (j, &v) in data.row(i).iter().enumerate() {
                out[i * d + j] = ((v - self.mean[j]) * self.scale[j]) as f32;
            }
        }
        Tensor::new(vec![n, d, 1, 1], out).expect("buffer sized to shape")
    }
}

/// Trains a softmax readout on the training features and returns its
/// accuracy on the test features. Features are standardized with training
/// statistics; optimization is plain seeded SGD, so the result is
/// deterministic for a fixed config.
pub fn linear_probe_accuracy(
    train_x: &Matrix,
    train_y: &[u8],
    test_x: &Matrix,
    test_y: &[u8],
    classes: usize,
    cfg: &LinearProbeConfig,
) -> Result<f64> {
    if train_x.cols() != test_x.cols() {
        return Err(crate::Error::Shape(format!(
            "probe: train dim {} vs test dim {}",
            train_x.cols(), test_x.cols()
        )));
    }
    let std = Standardizer::fit(train_x);
    let train_set = Dataset::new(std.to_tensor(train_x), train_y.to_vec(), classes)?;
    let test_set = Dataset::new(std.to_tensor(test_x), test_y.to_vec(), classes)?;
    let specs = vec![
        LayerSpec::Flatten,
        LayerSpec::Dense {
            inputs: train_x.cols(),
            outputs: classes,
        },
    ];
    let mut net = Network::new(&specs, cfg.seed)?;
    let tcfg = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        lr: cfg.lr,
        momentum: cfg.momentum,
        weight_decay: cfg.weight_decay,
        lr_decay: 1.0,
        seed: cfg.seed,
    };
    train::train(&mut net, &train_set, &tcfg)?;
    let (_, acc) = train::evaluate(&mut net, &test_set, 256)?;
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::blobs;

    #[test]
    fn separable_blobs_read_out_perfectly() {
        let (xtr, ytr) = blobs(120, 3, 4, 6.0, 50).unwrap();
        let (xte, yte) = blobs(60, 3, 4, 6.0, 51).unwrap();
        let acc = linear_probe_accuracy(&xtr, &ytr, &xte, &yte, 3, &LinearProbeConfig::default())
            .unwrap();
        assert!(acc > 0.95, "accuracy {acc}");
    }

    #[test]
    fn unlearnable_labels_stay_near_chance() {
        // Same cloud for every class: nothing to separate.
        let (xtr, _) = blobs(150, 1, 4, 0.0, 52).unwrap();
        let ytr: Vec<u8> = (0..150).map(|i| (i % 3) as u8).collect();
        let (xte, _) = blobs(90, 1, 4, 0.0, 53).unwrap();
        let yte: Vec<u8> = (0..90).map(|i| (i % 3) as u8).collect();
        let acc =
            linear_probe_accuracy(&xtr, &ytr, &xte, &yte, 3, &LinearProbeConfig::default()).unwrap();
        assert!(acc < 0.55, "accuracy {acc} on unlearnable labels");
    }

    #[test]
    fn constant_feature_columns_are_tolerated() {
        let (mut xtr, ytr) = blobs(60, 2, 2, 5.0, 54).unwrap();
        let (mut xte, yte) = blobs(30, 2, 2, 5.0, 55).unwrap();
        // Append an all-zero column to both splits.
        let widen = |m: &Matrix| {
            let rows: Vec<Vec<f64>> = (0..m.rows())
                .map(|i| {
                    let mut r = m.row(i).to_vec();
                    r.push(0.0);
                    r
                })
                .collect();
            Matrix::from_rows(&rows).unwrap()
        };
        xtr = widen(&xtr);
        xte = widen(&xte);
        let acc =
            linear_probe_accuracy(&xtr, &ytr, &xte, &yte, 2, &LinearProbeConfig::default()).unwrap();
        assert!(acc > 0.95, "accuracy {acc}");
    }
}
