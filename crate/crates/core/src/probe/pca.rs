//! Principal component analysis and a local intrinsic dimension estimate.

use rayon::prelude::*;

use crate::linalg::{self, Matrix};
use crate::probe::knn::Knn;
use crate::Result;

/// Fitted PCA basis. Components are unit-norm columns of a `[d, m]` matrix,
/// ordered by decreasing eigenvalue.
#[derive(Debug, Clone)]
pub struct Pca {
    mean: Vec<f64>,
    components: Matrix,
    /// All eigenvalues of the sample covariance that the fit could resolve
    /// (`min(n, d)` of them), descending. The first `m` belong to the kept
    /// components.
    eigenvalues: Vec<f64>,
}

impl Pca {
    /// Fits `m` components to the rows of `data`.
    ///
    /// When there are fewer samples than features the eigenproblem is solved
    /// on the n x n Gram matrix instead of the d x d covariance; the nonzero
    /// spectrum is the same and the components are recovered by mapping the
    /// Gram eigenvectors back through the data.
    pub fn fit(data: &Matrix, m: usize) -> Result<Self> {
        let (n, d) = (data.rows(), data.cols());
        if n < 2 {
            return Err(crate::Error::InvalidArgument(
                "pca needs at least two samples".into(),
            ));
        }
        if m == 0 || m > d.min(n) {
            return Err(crate::Error::InvalidArgument(format!(
                "pca: m = {m} out of range for {n} x {d} data"
            )));
        }
        let mean = linalg::row_mean(data);
        let mut centered = data.clone();
        for i in 0..n {
            for j in 0..d {
                let v = centered.get(i, j) - mean[j];
                centered.set(i, j, v);
            }
        }
        let (eigenvalues, components) = if d <= n {
            let (_, cov) = linalg::covariance(data)?;
            let eig = linalg::sym_eigen(&cov)?;
            let mut comp = Matrix::zeros(d, m);
            for c in 0..m {
                for r in 0..d {
                    comp.set(r, c, eig.vectors.get(r, c));
                }
            }
            (eig.values, comp)
        } else {
            // Gram route: G = Xc Xc^T / (n - 1) shares its nonzero
            // eigenvalues with the covariance, and v = Xc^T u / |Xc^T u|.
            let mut gram = Matrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let mut acc = 0.0;
                    for t in 0..d {
                        acc += centered.get(i, t) * centered.get(j, t);
                    }
                    acc /= (n - 1) as f64;
                    gram.set(i, j, acc);
                    gram.set(j, i, acc);
                }
            }
            let eig = linalg::sym_eigen(&gram)?;
            let mut comp = Matrix::zeros(d, m);
            for c in 0..m {
                let mut v = vec![0.0f64; d];
                for t in 0..d {
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += centered.get(i, t) * eig.vectors.get(i, c);
                    }
                    v[t] = acc;
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    for (r, x) in v.iter().enumerate() {
                        comp.set(r, c, x / norm);
                    }
                }
            }
            (eig.values, comp)
        };
        Ok(Self {
            mean,
            components,
            eigenvalues,
        })
    }

    pub fn dim(&self) -> usize {
        self.components.cols()
    }

    /// Kept principal axes, one per column, unit length.
    pub fn components(&self) -> &Matrix {
        &self.components
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Fraction of total variance carried by each resolved eigenvalue.
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().map(|&v| v.max(0.0)).sum();
        if total <= 0.0 {
            return vec![0.0; self.eigenvalues.len()];
        }
        self.eigenvalues.iter().map(|&v| v.max(0.0) / total).collect()
    }

    pub fn transform(&self, data: &Matrix) -> Result<Matrix> {
        if data.cols() != self.mean.len() {
            return Err(crate::Error::Shape(format!(
                "pca transform: {} columns, fitted on {}",
                data.cols(),
                self.mean.len()
            )));
        }
        let (n, m) = (data.rows(), self.dim());
        let mut out = Matrix::zeros(n, m);
        for i in 0..n {
            for c in 0..m {
                let mut acc = 0.0;
                for j in 0..data.cols() {
                    acc += (data.get(i, j) - self.mean[j]) * self.components.get(j, c);
                }
                out.set(i, c, acc);
            }
        }
        Ok(out)
    }

    /// Maps projected rows back into the original space.
    pub fn inverse_transform(&self, proj: &Matrix) -> Result<Matrix> {
        if proj.cols() != self.dim() {
            return Err(crate::Error::Shape(format!(
                "pca inverse: {} columns, basis has {}",
                proj.cols(),
                self.dim()
            )));
        }
        let (n, d) = (proj.rows(), self.mean.len());
        let mut out = Matrix::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                let mut acc = self.mean[j];
                for c in 0..proj.cols() {
                    acc += proj.get(i, c) * self.components.get(j, c);
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }
}

/// Mean local intrinsic dimension: for every point, PCA over it and its `k`
/// nearest neighbors, counting how many components are needed to explain
/// `threshold` of the neighborhood variance. Degenerate neighborhoods with
/// no variance count as dimension zero.
pub fn local_intrinsic_dim(features: &Matrix, k: usize, threshold: f64) -> Result<f64> {
    let n = features.rows();
    if k < 2 || k + 1 > n {
        return Err(crate::Error::InvalidArgument(format!(
            "local dim: k = {k} out of range for {n} samples"
        )));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(crate::Error::InvalidArgument(
            "local dim: threshold must be in (0, 1]".into(),
        ));
    }
    let dummy: Vec<u8> = vec![0; n];
    let knn = Knn::new(features, &dummy);
    let dims: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let near = knn.neighbors(features.row(i), k, Some(i));
            let mut rows: Vec<Vec<f64>> = vec![features.row(i).to_vec()];
            rows.extend(near.iter().map(|&(_, j)| features.row(j).to_vec()));
            let patch = Matrix::from_rows(&rows).expect("equal-length rows");
            let pca = Pca::fit(&patch, 1).expect("patch has k + 1 >= 3 rows");
            let total: f64 = pca.eigenvalues().iter().map(|&v| v.max(0.0)).sum();
            if total <= 1e-12 {
                return 0.0;
            }
            let mut acc = 0.0;
            for (r, &v) in pca.eigenvalues().iter().enumerate() {
                acc += v.max(0.0);
                if acc >= threshold * total {
                    return (r + 1) as f64;
                }
            }
            pca.eigenvalues().len() as f64
        })
        .collect();
    Ok(dims.iter().sum::<f64>() / n as f64)
}
