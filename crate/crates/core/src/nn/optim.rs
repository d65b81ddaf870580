//! Stochastic gradient descent with classical momentum.

use crate::nn::Param;

/// Update rule per element: `v = momentum * v - lr * (g + weight_decay * w)`
/// then `w += v`. With `momentum = 0` this is plain SGD.
pub struct Sgd {
    pub lr: f32,
    pub momentum: f32,
    pub weight_decay: f32,
    velocity: Vec<Vec<f32>>,
}

impl Sgd {
    pub fn new(lr: f32, momentum: f32, weight_decay: f32) -> Self {
        assert!(lr > 0.0, "learning rate must be positive");
        assert!((0.0..1.0).contains(&momentum), "momentum must be in [0, 1)");
        assert!(weight_decay >= 0.0, "weight decay must be non-negative");
        Self {
            lr,
            momentum,
            weight_decay,
            velocity: Vec::new(),
        }
    }

    /// Applies one update. The parameter list must keep the same order and
    /// sizes across calls; velocity buffers are allocated on first use.
    pub fn step(&mut self, params: Vec<Param<'_>>) {
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
        }
        assert_eq!(
            self.velocity.len(),
            params.len(),
            "parameter list changed between steps"
        );
        for (p, vel) in params.into_iter().zip(&mut self.velocity) {
            assert_eq!(p.value.len(), vel.len(), "parameter size changed");
            for ((w, &g), v) in p.value.iter_mut().zip(p.grad.iter()).zip(vel.iter_mut()) {
                *v = self.momentum * *v - self.lr * (g + self.weight_decay * *w);
                *w += *v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param<'a>(w: &'a mut [f32], g: &'a mut [f32]) -> Vec<Param<'a>> {
        vec![Param { value: w, grad: g }]
    }

    #[test]
    fn plain_sgd_subtracts_scaled_gradient() {
        let mut opt = Sgd::new(0.1, 0.0, 0.0);
        let mut w = [1.0f32, -1.0];
        let mut g = [2.0f32, 4.0];
        opt.step(one_param(&mut w, &mut g));
        assert_eq!(w, [0.8, -1.4]);
    }

    #[test]
    fn momentum_accumulates_velocity() {
        let mut opt = Sgd::new(0.1, 0.5, 0.0);
        let mut w = [0.0f32];
        let mut g = [1.0f32];
        opt.step(one_param(&mut w, &mut g));
        assert!((w[0] - -0.1).abs() < 1e-7);
        // second step: v = 0.5 * -0.1 - 0.1 = -0.15, w = -0.25
        let mut g = [1.0f32];
        opt.step(one_param(&mut w, &mut g));
        assert!((w[0] - -0.25).abs() < 1e-7);
    }

    #[test]
    fn weight_decay_pulls_toward_zero() {
        let mut opt = Sgd::new(0.1, 0.0, 0.5);
        let mut w = [2.0f32];
        let mut g = [0.0f32];
        opt.step(one_param(&mut w, &mut g));
        // g_eff = 0 + 0.5 * 2 = 1, w = 2 - 0.1 = 1.9
        assert!((w[0] - 1.9).abs() < 1e-7);
    }
}
