//! Central-difference verification of the analytic gradients.
//!
//! Every parameter is perturbed by `+h` and `-h`, the batch loss is
//! recomputed, and `(loss(+h) - loss(-h)) / (2h)` is compared against the
//! gradient that backprop produced. The comparison uses the usual mixed
//! tolerance `|a - n| <= atol + rtol * max(|a|, |n|)`: the absolute floor
//! absorbs f32 forward-pass noise (the loss itself is accumulated in f64,
//! but activations are f32), the relative part catches real sign and scale
//! bugs. ReLU kinks make the numeric estimate invalid if a perturbation
//! crosses one; with small `h` on a fixed batch this does not occur, and a
//! failure here is loud rather than silent.

use crate::nn::loss::softmax_cross_entropy;
use crate::nn::Network;
use crate::tensor::Tensor;
use crate::Result;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Number of scalar parameters compared.
    pub checked: usize,
    /// Worst value of `|a - n| / (atol + rtol * max(|a|, |n|))`; the check
    /// passes when this is at most 1.
    pub max_score: f64,
    pub max_abs_err: f64,
    pub mean_abs_err: f64,
    /// Parameter with the worst score, e.g. `conv1.w[17]`.
    pub worst: String,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_score <= 1.0
    }
}

fn batch_loss(net: &mut Network, images: &Tensor, labels: &[u8]) -> Result<f64> {
    let logits = net.forward(images)?;
    Ok(softmax_cross_entropy(&logits, labels)?.0)
}

/// Checks every parameter of `net` against central differences on the given
/// batch. `h` is the absolute perturbation applied to each weight.
pub fn check_gradients(
    net: &mut Network,
    images: &Tensor,
    labels: &[u8],
    h: f32,
    atol: f64,
    rtol: f64,
) -> Result<GradCheckReport> {
    assert!(h > 0.0 && atol > 0.0 && rtol > 0.0);
    net.zero_grad();
    let logits = net.forward(images)?;
    let (_, grad) = softmax_cross_entropy(&logits, labels)?;
    net.backward(&grad)?;
    let analytic: Vec<Vec<f32>> = net.params().iter().map(|p| p.grad.to_vec()).collect();
    let names = net.param_names();
    assert_eq!(names.len(), analytic.len());

    let mut checked = 0usize;
    let mut max_score = 0.0f64;
    let mut max_abs = 0.0f64;
    let mut sum_abs = 0.0f64;
    let mut worst = String::new();
    for (g, grads) in analytic.iter().enumerate() {
        for j in 0..grads.len() {
            let orig = net.params()[g].value[j];
            let wp = orig + h;
            let wm = orig - h;
            net.params()[g].value[j] = wp;
            let loss_p = batch_loss(net, images, labels)?;
            net.params()[g].value[j] = wm;
            let loss_m = batch_loss(net, images, labels)?;
            net.params()[g].value[j] = orig;
            // The stored values round to f32, so divide by the step that was
            // actually applied rather than the nominal 2h.
            let step = wp as f64 - wm as f64;
            let numeric = (loss_p - loss_m) / step;
            let a = grads[j] as f64;
            let err = (a - numeric).abs();
            let score = err / (atol + rtol * a.abs().max(numeric.abs()));
            checked += 1;
            sum_abs += err;
            if err > max_abs {
                max_abs = err;
            }
            if score > max_score {
                max_score = score;
                worst = format!("{}[{j}]", names[g]);
            }
        }
    }
    Ok(GradCheckReport {
        checked,
        max_score,
        max_abs_err: max_abs,
        mean_abs_err: sum_abs / checked.max(1) as f64,
        worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{uniform_cnn, LayerSpec};
    use crate::rng::{self, Rng};
    use rand_distr::{Distribution, Uniform};

    fn random_batch(n: usize, c: usize, hw: usize, classes: usize, r: &mut Rng) -> (Tensor, Vec<u8>) {
        let dist = Uniform::new(0.0f32, 1.0).unwrap();
        let data: Vec<f32> = (0..n * c * hw * hw).map(|_| dist.sample(r)).collect();
        let labels: Vec<u8> = (0..n).map(|i| (i % classes) as u8).collect();
        (Tensor::new(vec![n, c, hw, hw], data).unwrap(), labels)
    }

    /// Smallest distance of any value in `t` from zero. Inputs lie in [0, 1),
    /// so perturbing one parameter by `h` moves any pre-activation by at most
    /// `h`; a clearance above `2h` means no ReLU changes state during the
    /// check and the central difference stays valid.
    fn kink_clearance(t: &Tensor) -> f32 {
        t.data().iter().fold(f32::MAX, |m, v| m.min(v.abs()))
    }

    /// Smallest (max - runner-up) over all 2x2 pooling windows that pass a
    /// nonzero value. Entries shift by at most `h` each under a single-weight
    /// perturbation, so a gap above `4h` keeps every argmax fixed.
    fn pool_gap(act: &Tensor) -> f32 {
        let sh = act.shape();
        let (n, c, hh, ww) = (sh[0], sh[1], sh[2], sh[3]);
        let d = act.data();
        let mut gap = f32::MAX;
        for b in 0..n {
            for ch in 0..c {
                for i in (0..hh - 1).step_by(2) {
                    for j in (0..ww - 1).step_by(2) {
                        let mut vals = [0f32; 4];
                        for (t, (di, dj)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
                            vals[t] = d[((b * c + ch) * hh + i + di) * ww + j + dj];
                        }
                        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
                        if vals[0] > 0.0 {
                            gap = gap.min(vals[0] - vals[1]);
                        }
                    }
                }
            }
        }
        gap
    }

    #[test]
    fn dense_stack_gradients_match() {
        let h = 1e-2f32;
        let specs = vec![
            LayerSpec::Flatten,
            LayerSpec::Dense { inputs: 9, outputs: 6 },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: 6, outputs: 3 },
        ];
        let mut net = Network::new(&specs, 41).unwrap();
        let (x, y) = random_batch(6, 1, 3, 3, &mut rng::seeded(12));
        // These seeds keep every ReLU input well away from its kink; without
        // that the numeric estimate measures the wrong secant.
        let taps = net.forward_taps(&x).unwrap();
        let pre = taps.iter().find(|t| t.name == "dense1").unwrap();
        assert!(kink_clearance(&pre.tensor) > 2.0 * h, "seed walked onto a ReLU kink");
        let report = check_gradients(&mut net, &x, &y, h, 5e-4, 1e-2).unwrap();
        assert!(report.passed(), "worst {} score {}", report.worst, report.max_score);
        assert_eq!(report.checked, 9 * 6 + 6 + 6 * 3 + 3);
    }

    #[test]
    fn conv_stack_gradients_match() {
        // Small maps and a small step: with hundreds of conv outputs some
        // value is always near a ReLU kink or a pooling tie, which breaks the
        // finite-difference assumption regardless of gradient correctness.
        let h = 1e-3f32;
        let specs = uniform_cnn(1, 2, 1, 3);
        let mut net = Network::new(&specs, 8).unwrap();
        let (x, y) = random_batch(3, 1, 4, 3, &mut rng::seeded(12));
        let taps = net.forward_taps(&x).unwrap();
        let pre = taps.iter().find(|t| t.name == "conv1").unwrap();
        let act = taps.iter().find(|t| t.name == "relu1").unwrap();
        assert!(kink_clearance(&pre.tensor) > 2.0 * h, "seed walked onto a ReLU kink");
        assert!(pool_gap(&act.tensor) > 4.0 * h, "seed landed on a pooling tie");
        let report = check_gradients(&mut net, &x, &y, h, 5e-4, 1e-2).unwrap();
        assert!(report.passed(), "worst {} score {}", report.worst, report.max_score);
        assert_eq!(report.checked, 2 * 9 + 2 + 2 * 3 + 3);
    }

    #[test]
    fn a_broken_gradient_is_detected() {
        // Check with an absurdly tight tolerance that even honest f32 noise
        // fails; this guards against the checker degenerating into
        // always-pass.
        let specs = vec![
            LayerSpec::Flatten,
            LayerSpec::Dense { inputs: 4, outputs: 2 },
        ];
        let mut net = Network::new(&specs, 31).unwrap();
        let (x, y) = random_batch(4, 1, 2, 2, &mut rng::seeded(32));
        let report = check_gradients(&mut net, &x, &y, 1e-2, 1e-16, 1e-16).unwrap();
        assert!(!report.passed(), "tolerance floor has no effect");
    }
}
