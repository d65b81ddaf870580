//! Exact k-nearest-neighbor classification.
//!
//! Distances are squared Euclidean in f64 and every query scans the full
//! reference set, so results are exact. All orderings are pinned: neighbors
//! rank by `(distance, index)`, a majority-vote tie goes to the tied class
//! that appears earliest in that ranking. With these rules the classifier is
//! a pure function of its inputs.

use rayon::prelude::*;

use crate::linalg::Matrix;

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Reference set plus labels; classification borrows both.
pub struct Knn<'a> {
    features: &'a Matrix,
    labels: &'a [u8],
}

impl<'a> Knn<'a> {
    pub fn new(features: &'a Matrix, labels: &'a [u8]) -> Self {
        assert_eq!(features.rows(), labels.len(), "one label per row");
        Self { features, labels }
    }

    /// The `k` nearest reference rows to `query` as `(distance^2, index)`,
    /// ranked by `(distance, index)`. `exclude` removes one reference row,
    /// which is how leave-one-out evaluation skips the query itself.
    pub fn neighbors(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Vec<(f64, usize)> {
        assert!(k > 0, "k must be positive");
        let mut dists: Vec<(f64, usize)> = (0..self.features.rows())
            .filter(|&i| Some(i) != exclude)
            .map(|i| (squared_distance(query, self.features.row(i)), i))
            .collect();
        let k = k.min(dists.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| {
            a.0.partial_cmp(&b.0).expect("finite distance").then(a.1.cmp(&b.1))
        };
        if k < dists.len() {
            dists.select_nth_unstable_by(k - 1, cmp);
            dists.truncate(k);
        }
        dists.sort_unstable_by(cmp);
        dists
    }

    /// Majority vote over the `k` nearest neighbors.
    pub fn classify(&self, query: &[f64], k: usize, exclude: Option<usize>) -> u8 {
        let near = self.neighbors(query, k, exclude);
        assert!(!near.is_empty(), "empty reference set");
        let mut counts = [0usize; 256];
        for &(_, i) in &near {
            counts[self.labels[i] as usize] += 1;
        }
        let best = *counts.iter().max().unwrap();
        // First neighbor whose class reached the winning count.
        near.iter()
            .map(|&(_, i)| self.labels[i])
            .find(|&l| counts[l as usize] == best)
            .unwrap()
    }

    /// Leave-one-out accuracy over the reference set itself.
    pub fn loo_accuracy(&self, k: usize) -> f64 {
        let n = self.features.rows();
        assert!(n > 1, "leave-one-out needs at least two samples");
        let hits: usize = (0..n)
            .into_par_iter()
            .map(|i| {
                let pred = self.classify(self.features.row(i), k, Some(i));
                usize::from(pred == self.labels[i])
            })
            .sum();
        hits as f64 / n as f64
    }

    /// Accuracy on a held-out query set.
    pub fn accuracy_on(&self, queries: &Matrix, labels: &[u8], k: usize) -> f64 {
        assert_eq!(queries.rows(), labels.len());
        assert_eq!(queries.cols(), self.features.cols(), "feature dims differ");
        let hits: usize = (0..queries.rows())
            .into_par_iter()
            .map(|i| usize::from(self.classify(queries.row(i), k, None) == labels[i]))
            .sum();
        hits as f64 / queries.rows().max(1) as f64
    }
}
