//! Mini-batch training driver.
//!
//! Runs single-threaded on purpose: with a fixed seed the whole trajectory,
//! including f32 accumulation order, is reproducible bit for bit. The epoch
//! shuffle draws from the `SHUFFLE` stream of the run seed, so data order
//! never interacts with weight initialization.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::nn::loss::{accuracy, softmax_cross_entropy};
use crate::nn::{Network, Sgd};
use crate::rng;
use crate::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f32,
    pub momentum: f32,
    pub weight_decay: f32,
    /// Multiplier applied to the learning rate after each epoch.
    pub lr_decay: f32,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            lr: 0.05,
            momentum: 0.9,
            weight_decay: 1e-4,
            lr_decay: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch, weighted by batch size.
    pub loss: f64,
    /// Training accuracy measured on the shuffled batches as they were seen.
    pub accuracy: f64,
    pub seconds: f64,
}

/// Trains `net` in place and returns per-epoch statistics.
pub fn train(net: &mut Network, data: &Dataset, cfg: &TrainConfig) -> Result<Vec<EpochStats>> {
    if data.len() == 0 {
        return Err(crate::Error::InvalidArgument("empty training set".into()));
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(crate::Error::InvalidArgument(
            "batch_size and epochs must be positive".into(),
        ));
    }
    let mut opt = Sgd::new(cfg.lr, cfg.momentum, cfg.weight_decay);
    let mut shuffle_rng = rng::seeded(rng::derive(cfg.seed, rng::stream::SHUFFLE));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut stats = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0f64;
        let mut hit_sum = 0.0f64;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = data.subset(chunk);
            net.zero_grad();
            let logits = net.forward(&batch.images)?;
            let (loss, grad) = softmax_cross_entropy(&logits, &batch.labels)?;
            net.backward(&grad)?;
            opt.step(net.params());
            loss_sum += loss * chunk.len() as f64;
            hit_sum += accuracy(&logits, &batch.labels) * chunk.len() as f64;
        }
        opt.lr *= cfg.lr_decay;
        stats.push(EpochStats {
            epoch: epoch + 1,
            loss: loss_sum / data.len() as f64,
            accuracy: hit_sum / data.len() as f64,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(stats)
}

/// Loss and accuracy on a held-out set, without touching gradients.
pub fn evaluate(net: &mut Network, data: &Dataset, batch_size: usize) -> Result<(f64, f64)> {
    if data.len() == 0 {
        return Err(crate::Error::InvalidArgument("empty eval set".into()));
    }
    let order: Vec<usize> = (0..data.len()).collect();
    let mut loss_sum = 0.0f64;
    let mut hit_sum = 0.0f64;
    for chunk in order.chunks(batch_size.max(1)) {
        let batch = data.subset(chunk);
        let logits = net.forward(&batch.images)?;
        let (loss, _) = softmax_cross_entropy(&logits, &batch.labels)?;
        loss_sum += loss * chunk.len() as f64;
        hit_sum += accuracy(&logits, &batch.labels) * chunk.len() as f64;
    }
    Ok((loss_sum / data.len() as f64, hit_sum / data.len() as f64))
}
