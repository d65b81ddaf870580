//! Weight initialization.

use rand_distr::{Distribution, Normal};

use crate::rng::Rng;
use crate::tensor::Tensor;

/// He-normal initialization: zero-mean gaussian with variance `2 / fan_in`.
/// Suits ReLU stacks; biases start at zero.
pub fn he_normal(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Tensor {
    assert!(fan_in > 0, "fan_in must be positive");
    let std = (2.0 / fan_in as f64).sqrt();
    let dist = Normal::new(0.0, std).expect("std is finite and positive");
    let n: usize = shape.iter().product();
    let data: Vec<f32> = (0..n).map(|_| dist.sample(rng) as f32).collect();
    Tensor::new(shape.to_vec(), data).expect("buffer sized to shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn moments_roughly_match() {
        let mut r = rng::seeded(7);
        let t = he_normal(&[64, 50], 50, &mut r);
        let n = t.numel() as f64;
        let mean: f64 = t.data().iter().map(|&x| x as f64).sum::<f64>() / n;
        let var: f64 =
            t.data().iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.01, "mean {mean}");
        let expect = 2.0 / 50.0;
        assert!((var - expect).abs() < 0.2 * expect, "var {var} vs {expect}");
    }

    #[test]
    fn reproducible_for_a_seed() {
        let a = he_normal(&[3, 3], 9, &mut rng::seeded(1));
        let b = he_normal(&[3, 3], 9, &mut rng::seeded(1));
        assert_eq!(a.data(), b.data());
    }
}
