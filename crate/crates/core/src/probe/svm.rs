//! Support vector machines trained by sequential minimal optimization.
//!
//! The solver is two-multiplier coordinate ascent on the dual with the
//! maximal violating pair rule: each update takes the point most in need of
//! more mass and the point most in need of less, solves the two-variable
//! subproblem in closed form, and clips to the box. Optimization stops when
//! the gap between the two sides fits inside the KKT slack, which is a
//! statement about the iterate itself rather than about step sizes, so
//! near-duplicate rows cannot make the loop spin on microscopic updates.
//! When the preferred pair is box-limited, the violator tries the remaining
//! partners in index order before the solver reports a stall. Every choice
//! is deterministic (ties go to the lower index), so training on the same
//! inputs always yields the same model.
//!
//! Kernel values are precomputed into an n x n matrix; probe-sized sample
//! sets keep that cheap.

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(&x, &y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }

    /// Full kernel matrix between the rows of `x`.
    pub fn matrix(&self, x: &Matrix) -> Matrix {
        let n = x.rows();
        let mut k = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.eval(x.row(i), x.row(j));
                k.set(i, j, v);
                k.set(j, i, v);
            }
        }
        k
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmConfig {
    /// Box constraint on the dual variables.
    pub c: f64,
    /// KKT slack: optimization stops once every point satisfies its
    /// condition within this margin.
    pub tol: f64,
    /// Safety net: the solver gives up after `max_sweeps * n` pair updates.
    pub max_sweeps: usize,
    pub kernel: Kernel,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-3,
            max_sweeps: 2000,
            kernel: Kernel::Linear,
        }
    }
}

/// A trained two-class machine. Labels are +-1; `alpha` keeps one entry per
/// training row so the dual solution can be inspected directly.
#[derive(Debug, Clone)]
pub struct BinarySvm {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub kernel: Kernel,
    support: Matrix,
    support_y: Vec<f64>,
}

impl BinarySvm {
    /// Trains on `x` with labels `y` in {-1, +1}.
    pub fn train(x: &Matrix, y: &[f64], cfg: &SvmConfig) -> Result<Self> {
        let n = x.rows();
        if n < 2 {
            return Err(crate::Error::InvalidArgument(
                "svm needs at least two samples".into(),
            ));
        }
        if y.len() != n {
            return Err(crate::Error::Shape(format!(
                "svm: {n} rows but {} labels",
                y.len()
            )));
        }
        if y.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(crate::Error::InvalidArgument(
                "svm labels must be -1 or +1".into(),
            ));
        }
        if !(cfg.c > 0.0) {
            return Err(crate::Error::InvalidArgument("svm: C must be positive".into()));
        }
        let k = cfg.kernel.matrix(x);
        let mut alpha = vec![0.0f64; n];
        let mut bias = 0.0f64;
        // E_i = f(x_i) - y_i, kept incrementally up to date.
        let mut err: Vec<f64> = (0..n).map(|i| -y[i]).collect();
        let mut updates = 0usize;
        while let Some((i, j, gap)) = violating_pair(y, &alpha, &err, cfg.c) {
            // One shared bias shift can satisfy both sides as long as their
            // gap fits inside twice the slack.
            if gap <= 2.0 * cfg.tol {
                break;
            }
            let mut moved = step(i, j, &k, y, cfg, &mut alpha, &mut bias, &mut err);
            // The preferred pair can be box-limited; let the worst violator
            // try the remaining partners in index order so it is never
            // abandoned while the gap is still open.
            if !moved {
                for cand in 0..n {
                    if cand == i || cand == j {
                        continue;
                    }
                    if step(i, cand, &k, y, cfg, &mut alpha, &mut bias, &mut err) {
                        moved = true;
                        break;
                    }
                }
            }
            if !moved {
                return Err(crate::Error::NoConvergence(
                    "smo",
                    format!("stalled at optimality gap {gap:.2e}"),
                ));
            }
            updates += 1;
            if updates >= cfg.max_sweeps.saturating_mul(n) {
                return Err(crate::Error::NoConvergence(
                    "smo",
                    format!("optimality gap {gap:.2e} after {updates} pair updates"),
                ));
            }
        }
        // Centre the bias inside the slack so neither side carries the whole
        // remaining gap; per-point violations end up within half of it.
        if let Some((lo, hi, _)) = violating_pair(y, &alpha, &err, cfg.c) {
            let shift = -0.5 * (err[lo] + err[hi]);
            bias += shift;
            for e in &mut err {
                *e += shift;
            }
        }
        Ok(Self {
            alpha,
            bias,
            kernel: cfg.kernel,
            support: x.clone(),
            support_y: y.to_vec(),
        })
    }

    /// Decision value `f(q) = sum_i alpha_i y_i K(x_i, q) + b`.
    pub fn decision(&self, q: &[f64]) -> f64 {
        let mut acc = self.bias;
        for i in 0..self.support.rows() {
            if self.alpha[i] == 0.0 {
                continue;
            }
            acc += self.alpha[i] * self.support_y[i] * self.kernel.eval(self.support.row(i), q);
        }
        acc
    }

    pub fn predict(&self, q: &[f64]) -> f64 {
        if self.decision(q) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Worst KKT violation at slack `tol`, zero when fully converged:
    /// free multipliers need `y f = 1`, zeros need `y f >= 1`, bound ones
    /// need `y f <= 1`.
    pub fn kkt_violation(&self, c: f64) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.support.rows() {
            let yf = self.support_y[i] * self.decision(self.support.row(i));
            let v = if self.alpha[i] <= BOUND_EPS {
                (1.0 - yf).max(0.0)
            } else if self.alpha[i] >= c - BOUND_EPS {
                (yf - 1.0).max(0.0)
            } else {
                (yf - 1.0).abs()
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Dual objective `sum alpha - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij`.
    pub fn dual_objective(&self) -> f64 {
        let k = self.kernel.matrix(&self.support);
        dual_objective(&self.alpha, &self.support_y, &k)
    }

    /// `sum alpha_i y_i`, an invariant the solver must hold at exactly zero
    /// up to rounding.
    pub fn equality_residual(&self) -> f64 {
        self.alpha
            .iter()
            .zip(&self.support_y)
            .map(|(&a, &y)| a * y)
            .sum()
    }
}

/// Dual objective for a multiplier vector against a precomputed kernel.
pub fn dual_objective(alpha: &[f64], y: &[f64], k: &Matrix) -> f64 {
    let n = alpha.len();
    let mut obj: f64 = alpha.iter().sum();
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            obj -= 0.5 * alpha[i] * alpha[j] * y[i] * y[j] * k.get(i, j);
        }
    }
    obj
}

/// Multipliers this close to 0 or C count as sitting on the bound. The same
/// constant gates the box-edge snap, the minimum accepted step, and set
/// classification: if any of the three used a smaller value, a multiplier
/// could hold less mass than the smallest legal step and look movable while
/// no partner could actually move it.
const BOUND_EPS: f64 = 1e-7;

/// Picks the maximal violating pair: `i` minimizes the error over points
/// that may gain mass, `j` maximizes it over points that may shed mass. The
/// returned gap `err[j] - err[i]` is zero exactly at the optimum; ties go to
/// the lower index so selection is deterministic.
fn violating_pair(y: &[f64], alpha: &[f64], err: &[f64], c: f64) -> Option<(usize, usize, f64)> {
    let mut up: Option<usize> = None;
    let mut low: Option<usize> = None;
    for t in 0..y.len() {
        let at_lower = alpha[t] <= BOUND_EPS;
        let at_upper = alpha[t] >= c - BOUND_EPS;
        let can_gain = if y[t] > 0.0 { !at_upper } else { !at_lower };
        let can_shed = if y[t] > 0.0 { !at_lower } else { !at_upper };
        if can_gain && up.is_none_or(|b| err[t] < err[b]) {
            up = Some(t);
        }
        if can_shed && low.is_none_or(|b| err[t] > err[b]) {
            low = Some(t);
        }
    }
    match (up, low) {
        (Some(i), Some(j)) if i != j => Some((i, j, err[j] - err[i])),
        _ => None,
    }
}

/// One two-variable update. Returns whether the multipliers moved.
#[allow(clippy::too_many_arguments)]
fn step(
    i: usize,
    j: usize,
    k: &Matrix,
    y: &[f64],
    cfg: &SvmConfig,
    alpha: &mut [f64],
    bias: &mut f64,
    err: &mut [f64],
) -> bool {
    let (ai_old, aj_old) = (alpha[i], alpha[j]);
    let (lo, hi) = if y[i] != y[j] {
        ((aj_old - ai_old).max(0.0), (cfg.c + aj_old - ai_old).min(cfg.c))
    } else {
        ((ai_old + aj_old - cfg.c).max(0.0), (ai_old + aj_old).min(cfg.c))
    };
    if lo >= hi {
        return false;
    }
    // Flat directions (duplicate or collinear rows) get a tiny curvature
    // floor instead of a skip: the unbounded step then lands on a box edge,
    // which changes the active sets and keeps the solver making progress.
    let eta = (2.0 * k.get(i, j) - k.get(i, i) - k.get(j, j)).min(-1e-12);
    let mut aj = aj_old - y[j] * (err[i] - err[j]) / eta;
    aj = aj.clamp(lo, hi);
    // Snap to the box edge; otherwise clipped updates leave dust-sized
    // multipliers that later misreport as free in KKT checks.
    if aj < BOUND_EPS {
        aj = 0.0;
    } else if aj > cfg.c - BOUND_EPS {
        aj = cfg.c;
    }
    if (aj - aj_old).abs() < BOUND_EPS {
        return false;
    }
    let mut ai = ai_old + y[i] * y[j] * (aj_old - aj);
    // The derived multiplier only collects rounding residue, so a much
    // tighter snap suffices and keeps the equality constraint intact.
    if ai.abs() < 1e-12 {
        ai = 0.0;
    } else if (ai - cfg.c).abs() < 1e-12 {
        ai = cfg.c;
    }
    let b1 = *bias - err[i]
        - y[i] * (ai - ai_old) * k.get(i, i)
        - y[j] * (aj - aj_old) * k.get(i, j);
    let b2 = *bias - err[j]
        - y[i] * (ai - ai_old) * k.get(i, j)
        - y[j] * (aj - aj_old) * k.get(j, j);
    let new_bias = if ai > 0.0 && ai < cfg.c {
        b1
    } else if aj > 0.0 && aj < cfg.c {
        b2
    } else {
        0.5 * (b1 + b2)
    };
    let db = new_bias - *bias;
    for (t, e) in err.iter_mut().enumerate() {
        *e += y[i] * (ai - ai_old) * k.get(i, t)
            + y[j] * (aj - aj_old) * k.get(j, t)
            + db;
    }
    alpha[i] = ai;
    alpha[j] = aj;
    *bias = new_bias;
    true
}

/// One-vs-rest wrapper for multiclass problems.
#[derive(Debug, Clone)]
pub struct OvrSvm {
    machines: Vec<BinarySvm>,
}

impl OvrSvm {
    pub fn train(x: &Matrix, labels: &[u8], classes: usize, cfg: &SvmConfig) -> Result<Self> {
        if classes < 2 {
            return Err(crate::Error::InvalidArgument(
                "one-vs-rest needs at least two classes".into(),
            ));
        }
        let mut machines = Vec::with_capacity(classes);
        for c in 0..classes {
            let y: Vec<f64> = labels
                .iter()
                .map(|&l| if l as usize == c { 1.0 } else { -1.0 })
                .collect();
            if y.iter().all(|&v| v == 1.0) || y.iter().all(|&v| v == -1.0) {
                return Err(crate::Error::InvalidArgument(format!(
                    "class {c} is empty or covers every sample"
                )));
            }
            machines.push(BinarySvm::train(x, &y, cfg)?);
        }
        Ok(Self { machines })
    }

    /// Argmax of the per-class decision values; ties to the lower class.
    pub fn predict(&self, q: &[f64]) -> u8 {
        let mut best = 0usize;
        let mut best_v = f64::NEG_INFINITY;
        for (c, m) in self.machines.iter().enumerate() {
            let v = m.decision(q);
            if v > best_v {
                best_v = v;
                best = c;
            }
        }
        best as u8
    }

    pub fn accuracy_on(&self, x: &Matrix, labels: &[u8]) -> f64 {
        let hits = (0..x.rows())
            .filter(|&i| self.predict(x.row(i)) == labels[i])
            .count();
        hits as f64 / x.rows().max(1) as f64
    }

    pub fn machines(&self) -> &[BinarySvm] {
        &self.machines
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::blobs;

    /// Two points, one per class, at x = +-1. By symmetry the optimum has
    /// alpha_0 = alpha_1 = a with w = 2a and the margin constraint active:
    /// w * 1 + b = 1 and w * -1 + b = -1, so b = 0, w = 1, a = 1/2.
    #[test]
    fn two_point_problem_matches_hand_solution() {
        let x = Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let y = [1.0, -1.0];
        let svm = BinarySvm::train(&x, &y, &SvmConfig::default()).unwrap();
        assert!((svm.alpha[0] - 0.5).abs() < 1e-6, "alpha {:?}", svm.alpha);
        assert!((svm.alpha[1] - 0.5).abs() < 1e-6);
        assert!(svm.bias.abs() < 1e-6, "bias {}", svm.bias);
        assert!((svm.decision(&[1.0]) - 1.0).abs() < 1e-6);
        assert!((svm.decision(&[-1.0]) + 1.0).abs() < 1e-6);
    }

    #[test]
    fn separable_blobs_are_classified_perfectly() {
        let (x, labels) = blobs(60, 2, 3, 6.0, 41).unwrap();
        let y: Vec<f64> = labels.iter().map(|&l| if l == 0 { 1.0 } else { -1.0 }).collect();
        let svm = BinarySvm::train(&x, &y, &SvmConfig::default()).unwrap();
        for i in 0..x.rows() {
            assert_eq!(svm.predict(x.row(i)), y[i], "row {i}");
        }
        assert!(svm.kkt_violation(1.0) <= 1.5e-3, "kkt {}", svm.kkt_violation(1.0));
        assert!(svm.equality_residual().abs() < 1e-9);
    }

    #[test]
    fn xor_needs_the_rbf_kernel() {
        let x = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        ]).unwrap();
        let y = [1.0, 1.0, -1.0, -1.0];
        let cfg = SvmConfig {
            c: 10.0,
            kernel: Kernel::Rbf { gamma: 1.0 },
            ..SvmConfig::default()
        };
        let svm = BinarySvm::train(&x, &y, &cfg).unwrap();
        for i in 0..4 {
            assert_eq!(svm.predict(x.row(i)), y[i], "corner {i}");
        }
    }

    #[test]
    fn one_vs_rest_handles_three_blobs() {
        let (x, labels) = blobs(90, 3, 4, 7.0, 42).unwrap();
        let svm = OvrSvm::train(&x, &labels, 3, &SvmConfig::default()).unwrap();
        let acc = svm.accuracy_on(&x, &labels);
        assert!(acc > 0.97, "accuracy {acc}");
    }

    #[test]
    fn rejects_bad_labels() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(BinarySvm::train(&x, &[1.0, 0.5], &SvmConfig::default()).is_err());
        assert!(BinarySvm::train(&x, &[1.0], &SvmConfig::default()).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let (x, labels) = blobs(40, 2, 3, 4.0, 43).unwrap();
        let y: Vec<f64> = labels.iter().map(|&l| if l == 0 { 1.0 } else { -1.0 }).collect();
        let a = BinarySvm::train(&x, &y, &SvmConfig::default()).unwrap();
        let b = BinarySvm::train(&x, &y, &SvmConfig::default()).unwrap();
        assert_eq!(a.alpha, b.alpha);
        assert_eq!(a.bias, b.bias);
    }

}
