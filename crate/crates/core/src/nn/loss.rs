//! Softmax cross-entropy.

use crate::tensor::Tensor;
use crate::Result;

/// Mean cross-entropy over a batch of logits `[n, k]`, plus the gradient
/// `(softmax - onehot) / n` ready to feed into the last layer's backward.
///
/// The per-sample losses are accumulated in f64 so the value is stable
/// enough to difference numerically during gradient checking.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[u8]) -> Result<(f64, Tensor)> {
    let &[n, k] = logits.shape() else {
        return Err(crate::Error::Shape(format!(
            "loss: expected logits [n, k], got {:?}",
            logits.shape()
        )));
    };
    if labels.len() != n {
        return Err(crate::Error::Shape(format!(
            "loss: {n} logit rows but {} labels",
            labels.len()
        )));
    }
    if n == 0 {
        return Err(crate::Error::InvalidArgument("loss: empty batch".into()));
    }
    let mut grad = vec![0.0f32; n * k];
    let mut total = 0.0f64;
    let scale = 1.0 / n as f32;
    for i in 0..n {
        let row = logits.sample(i);
        let y = labels[i] as usize;
        if y >= k {
            return Err(crate::Error::InvalidArgument(format!(
                "loss: label {y} out of range for {k} classes"
            )));
        }
        let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        let mut denom = 0.0f64;
        for &z in row {
            denom += ((z - max) as f64).exp();
        }
        total += denom.ln() - (row[y] - max) as f64;
        let g = &mut grad[i * k..(i + 1) * k];
        for (j, &z) in row.iter().enumerate() {
            let p = (((z - max) as f64).exp() / denom) as f32;
            g[j] = (p - if j == y { 1.0 } else { 0.0 }) * scale;
        }
    }
    Ok((total / n as f64, Tensor::new(vec![n, k], grad)?))
}

/// Index of the largest entry in each row; ties go to the lower index.
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    let k = logits.sample_len();
    (0..logits.batch())
        .map(|i| {
            let row = logits.sample(i);
            let mut best = 0;
            for j in 1..k {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Fraction of rows whose argmax equals the label.
pub fn accuracy(logits: &Tensor, labels: &[u8]) -> f64 {
    let preds = argmax_rows(logits);
    let hits = preds
        .iter()
        .zip(labels)
        .filter(|&(&p, &y)| p == y as usize)
        .count();
    hits as f64 / labels.len().max(1) as f64
}
