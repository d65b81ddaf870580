//! Small dense f64 matrix kit for the analysis side of the crate.
//!
//! The only nontrivial routine is [`sym_eigen`], a cyclic Jacobi
//! eigendecomposition for real symmetric matrices: a sequence of plane
//! rotations, each annihilating one off-diagonal element, accumulated into an
//! orthonormal eigenvector matrix. Slower than QR for large matrices but
//! unconditionally robust, which is what the covariance matrices here need.
//!
//! Follows the classic scheme of Numerical Recipes §11.1 (threshold sweeps,
//! running diagonal corrections).

use crate::{Error, Result};

/// Dense row-major f64 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("rows have unequal lengths".into()));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{}x{} matrix needs {} elements, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!(
                "matvec: {}x{} matrix with length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Eigendecomposition of a real symmetric matrix: `A = V diag(values) V^T`.
///
/// Eigenvalues are sorted descending; `vectors` holds the matching
/// eigenvectors as columns, each with its largest-magnitude component made
/// positive so decompositions are reproducible.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymEigen {
    /// Column `j` of the eigenvector matrix.
    pub fn vector(&self, j: usize) -> Vec<f64> {
        (0..self.vectors.rows()).map(|i| self.vectors.get(i, j)).collect()
    }
}

const MAX_SWEEPS: usize = 64;

/// Jacobi eigendecomposition of a symmetric matrix.
///
/// Symmetry is taken on trust from the lower triangle's perspective: only the
/// upper triangle is read. Returns an error for non-square input or if the
/// off-diagonal mass has not vanished after [`MAX_SWEEPS`] sweeps.
pub fn sym_eigen(a: &Matrix) -> Result<SymEigen> {
    if a.rows != a.cols {
        return Err(Error::Shape(format!("sym_eigen needs a square matrix, got {}x{}", a.rows, a.cols)));
    }
    let n = a.rows;
    if n == 0 {
        return Ok(SymEigen { values: vec![], vectors: Matrix::zeros(0, 0) });
    }

    let mut a = a.clone();
    let mut v = Matrix::identity(n);
    // d: running eigenvalue estimates; b, z implement the NR trick of
    // accumulating the diagonal corrections once per sweep.
    let mut d: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    let mut b = d.clone();
    let mut z = vec![0.0; n];

    for sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n - 1 {
            for q in p + 1..n {
                off += a.get(p, q).abs();
            }
        }
        if off == 0.0 {
            return Ok(finish(d, v));
        }

        // Skip small rotations during the first sweeps.
        let tresh = if sweep < 3 { 0.2 * off / (n * n) as f64 } else { 0.0 };

        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a.get(p, q);
                let g = 100.0 * apq.abs();
                // Once an off-diagonal entry is negligible relative to both
                // diagonal entries, zero it outright.
                if sweep > 3 && d[p].abs() + g == d[p].abs() && d[q].abs() + g == d[q].abs() {
                    a.set(p, q, 0.0);
                    continue;
                }
                if apq.abs() <= tresh {
                    continue;
                }

                let h = d[q] - d[p];
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let mut t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        t = -t;
                    }
                    t
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let h = t * apq;

                z[p] -= h;
                z[q] += h;
                d[p] -= h;
                d[q] += h;
                a.set(p, q, 0.0);

                let rotate = |m: &mut Matrix, i1: usize, j1: usize, i2: usize, j2: usize| {
                    let g = m.get(i1, j1);
                    let h = m.get(i2, j2);
                    m.set(i1, j1, g - s * (h + g * tau));
                    m.set(i2, j2, h + s * (g - h * tau));
                };
                for j in 0..p {
                    rotate(&mut a, j, p, j, q);
                }
                for j in p + 1..q {
                    rotate(&mut a, p, j, j, q);
                }
                for j in q + 1..n {
                    rotate(&mut a, p, j, q, j);
                }
                for j in 0..n {
                    rotate(&mut v, j, p, j, q);
                }
            }
        }

        for p in 0..n {
            b[p] += z[p];
            d[p] = b[p];
            z[p] = 0.0;
        }
    }

    Err(Error::NoConvergence(
        "jacobi eigendecomposition",
        format!("off-diagonal mass remained after {MAX_SWEEPS} sweeps (n = {n})"),
    ))
}

/// Sort eigenpairs descending and fix each eigenvector's sign.
fn finish(d: Vec<f64>, v: Matrix) -> SymEigen {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap());

    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        // Sign convention: largest-|component| entry is positive.
        let mut pivot = 0;
        let mut best = 0.0;
        for i in 0..n {
            let x = v.get(i, old_j).abs();
            if x > best {
                best = x;
                pivot = i;
            }
        }
        let sign = if v.get(pivot, old_j) < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors.set(i, new_j, sign * v.get(i, old_j));
        }
    }
    SymEigen { values, vectors }
}

/// Mean of `n` points given as rows of an `n x d` matrix.
pub fn row_mean(points: &Matrix) -> Vec<f64> {
    let (n, d) = (points.rows(), points.cols());
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, &x) in mean.iter_mut().zip(points.row(i)) {
            *m += x;
        }
    }
    if n > 0 {
        for m in &mut mean {
            *m /= n as f64;
        }
    }
    mean
}

/// Sample covariance (denominator `n - 1`) of points given as rows.
pub fn covariance(points: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let (n, d) = (points.rows(), points.cols());
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "covariance needs at least 2 points, got {n}"
        )));
    }
    let mean = row_mean(points);
    let mut cov = Matrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for i in 0..n {
        for (c, (&x, &m)) in centered.iter_mut().zip(points.row(i).iter().zip(&mean)) {
            *c = x - m;
        }
        for p in 0..d {
            let cp = centered[p];
            if cp == 0.0 {
                continue;
            }
            let row = &mut cov.data[p * d..(p + 1) * d];
            for (q, &cq) in centered.iter().enumerate() {
                row[q] += cp * cq;
            }
        }
    }
    let scale = 1.0 / (n - 1) as f64;
    for x in &mut cov.data {
        *x *= scale;
    }
    Ok((mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_decomposition(a: &Matrix, eig: &SymEigen, tol: f64) {
        let n = a.rows();
        // A v_j = lambda_j v_j
        for j in 0..n {
            let vj = eig.vector(j);
            let av = a.matvec(&vj).unwrap();
            for i in 0..n {
                assert!(
                    (av[i] - eig.values[j] * vj[i]).abs() < tol,
                    "residual {} at ({}, {})",
                    (av[i] - eig.values[j] * vj[i]).abs(),
                    i,
                    j
                );
            }
        }
        // V^T V = I
        let vtv = eig.vectors.transpose().matmul(&eig.vectors).unwrap();
        assert!(vtv.max_abs_diff(&Matrix::identity(n)) < tol);
    }

    #[test]
    fn two_by_two_analytic() {
        // [[3, 4], [4, 3]]: eigenvalues 7 and -1, eigenvectors (1,1)/sqrt2, (1,-1)/sqrt2.
        let a = Matrix::from_rows(&[vec![3.0, 4.0], vec![4.0, 3.0]]).unwrap();
        let eig = sym_eigen(&a).unwrap();
        assert!((eig.values[0] - 7.0).abs() < 1e-13);
        assert!((eig.values[1] + 1.0).abs() < 1e-13);
        let s = 1.0 / 2.0_f64.sqrt();
        let v0 = eig.vector(0);
        assert!((v0[0] - s).abs() < 1e-12 && (v0[1] - s).abs() < 1e-12);
        check_decomposition(&a, &eig, 1e-12);
    }

    #[test]
    fn diagonal_matrix_is_its_own_decomposition() {
        let a = Matrix::from_rows(&[
            vec![2.0, 0.0, 0.0],
            vec![0.0, 5.0, 0.0],
            vec![0.0, 0.0, -1.0],
        ])
        .unwrap();
        let eig = sym_eigen(&a).unwrap();
        assert_eq!(eig.values.len(), 3);
        assert!((eig.values[0] - 5.0).abs() < 1e-15);
        assert!((eig.values[1] - 2.0).abs() < 1e-15);
        assert!((eig.values[2] + 1.0).abs() < 1e-15);
        check_decomposition(&a, &eig, 1e-14);
    }

    #[test]
    fn random_symmetric_20x20() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(7);
        let n = 20;
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.random_range(-1.0..1.0);
                a.set(i, j, x);
                a.set(j, i, x);
            }
        }
        let eig = sym_eigen(&a).unwrap();
        check_decomposition(&a, &eig, 1e-10);
        // Trace is preserved.
        let trace: f64 = (0..n).map(|i| a.get(i, i)).sum();
        let sum: f64 = eig.values.iter().sum();
        assert!((trace - sum).abs() < 1e-10);
        // Sorted descending.
        assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn non_square_rejected() {
        let a = Matrix::zeros(2, 3);
        assert!(sym_eigen(&a).is_err());
    }

    #[test]
    fn covariance_of_known_points() {
        // Points (0,0), (2,0), (0,2), (2,2): mean (1,1), sample cov = (4/3) I.
        let pts = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![2.0, 0.0],
            vec![0.0, 2.0],
            vec![2.0, 2.0],
        ])
        .unwrap();
        let (mean, cov) = covariance(&pts).unwrap();
        assert_eq!(mean, vec![1.0, 1.0]);
        assert!((cov.get(0, 0) - 4.0 / 3.0).abs() < 1e-15);
        assert!((cov.get(1, 1) - 4.0 / 3.0).abs() < 1e-15);
        assert!(cov.get(0, 1).abs() < 1e-15);
    }
}
