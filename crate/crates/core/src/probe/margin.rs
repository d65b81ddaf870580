//! Distance-to-boundary and neighborhood separation statistics.

use rayon::prelude::*;

use crate::linalg::Matrix;
use crate::probe::knn::squared_distance;
use crate::Result;

/// Per-sample distance to the nearest sample of a different class, and to
/// the nearest sample of the same class. Either entry is infinite when the
/// class structure leaves no candidate.
#[derive(Debug, Clone)]
pub struct NeighborDistances {
    pub to_other: Vec<f64>,
    pub to_same: Vec<f64>,
}

pub fn neighbor_distances(features: &Matrix, labels: &[u8]) -> NeighborDistances {
    assert_eq!(features.rows(), labels.len());
    let n = features.rows();
    let pairs: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut other = f64::INFINITY;
            let mut same = f64::INFINITY;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d2 = squared_distance(features.row(i), features.row(j));
                if labels[j] == labels[i] {
                    same = same.min(d2);
                } else {
                    other = other.min(d2);
                }
            }
            (other.sqrt(), same.sqrt())
        })
        .collect();
    NeighborDistances {
        to_other: pairs.iter().map(|p| p.0).collect(),
        to_same: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Summary of how tightly classes cluster relative to their separation.
/// `ratio` is mean same-class over mean other-class nearest distance;
/// small values mean classes sit in tight, well-separated clumps.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SeparationStats {
    pub mean_to_same: f64,
    pub mean_to_other: f64,
    pub ratio: f64,
}

pub fn separation_stats(features: &Matrix, labels: &[u8]) -> SeparationStats {
    let nd = neighbor_distances(features, labels);
    let finite_mean = |v: &[f64]| {
        let vals: Vec<f64> = v.iter().copied().filter(|d| d.is_finite()).collect();
        if vals.is_empty() {
            f64::NAN
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    let mean_to_same = finite_mean(&nd.to_same);
    let mean_to_other = finite_mean(&nd.to_other);
    SeparationStats {
        mean_to_same,
        mean_to_other,
        ratio: mean_to_same / mean_to_other,
    }
}

/// Distance from `a` to the decision boundary along the segment toward `b`,
/// found by bisection on the classifier's prediction. The endpoints must
/// disagree; the point returned as the crossing stays on the `a` side, so
/// after `iters` halvings the answer is exact to `|b - a| / 2^iters`.
pub fn bisect_boundary<F>(classify: &F, a: &[f64], b: &[f64], iters: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> u8,
{
    if a.len() != b.len() {
        return Err(crate::Error::Shape(format!(
            "bisect: endpoint dims {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let ca = classify(a);
    if ca == classify(b) {
        return Err(crate::Error::InvalidArgument(
            "bisect: endpoints are classified alike".into(),
        ));
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut point = vec![0.0f64; a.len()];
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        for (t, slot) in point.iter_mut().enumerate() {
            *slot = a[t] + mid * (b[t] - a[t]);
        }
        if classify(&point) == ca {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let seg = squared_distance(a, b).sqrt();
    Ok(0.5 * (lo + hi) * seg)
}

/// Mean bisection margin of up to `cap` samples: each sample is paired with
/// its nearest other-class sample and the boundary of the 1-NN rule over the
/// full set is located along that segment. Samples are taken in index order
/// so the estimate is reproducible.
pub fn mean_nn_margin(
    features: &Matrix,
    labels: &[u8],
    cap: usize,
    iters: usize,
) -> Result<f64> {
    assert_eq!(features.rows(), labels.len());
    let n = features.rows();
    if n < 2 {
        return Err(crate::Error::InvalidArgument(
            "margin needs at least two samples".into(),
        ));
    }
    let knn = crate::probe::knn::Knn::new(features, labels);
    let classify = |q: &[f64]| knn.classify(q, 1, None);
    let take = cap.min(n);
    let margins: Vec<f64> = (0..take)
        .into_par_iter()
        .filter_map(|i| {
            let mut best = f64::INFINITY;
            let mut partner = None;
            for j in 0..n {
                if labels[j] == labels[i] {
                    continue;
                }
                let d2 = squared_distance(features.row(i), features.row(j));
                if d2 < best {
                    best = d2;
                    partner = Some(j);
                }
            }
            let j = partner?;
            // Under the 1-NN rule the endpoints classify as their own
            // labels, which differ, so bisection is well posed.
            bisect_boundary(&classify, features.row(i), features.row(j), iters).ok()
        })
        .collect();
    if margins.is_empty() {
        return Err(crate::Error::InvalidArgument(
            "margin: no cross-class pairs found".into(),
        ));
    }
    Ok(margins.iter().sum::<f64>() / margins.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbor_distances_on_a_line() {
        let m = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![4.0], vec![5.0]]).unwrap();
        let y = vec![0, 0, 1, 1];
        let nd = neighbor_distances(&m, &y);
        assert_eq!(nd.to_same, vec![1.0, 1.0, 1.0, 1.0]);
        assert_eq!(nd.to_other, vec![4.0, 3.0, 3.0, 4.0]);
        let stats = separation_stats(&m, &y);
        assert!((stats.ratio - 1.0 / 3.5).abs() < 1e-12);
    }

    #[test]
    fn single_class_gives_infinite_other_distance() {
        let m = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let nd = neighbor_distances(&m, &[3, 3]);
        assert!(nd.to_other.iter().all(|d| d.is_infinite()));
    }

    #[test]
    fn bisection_finds_a_known_threshold() {
        // Classifier: class 1 iff x >= 0.7303. From 0 toward 1 the boundary
        // sits at exactly that distance.
        let f = |q: &[f64]| u8::from(q[0] >= 0.7303);
        let d = bisect_boundary(&f, &[0.0], &[1.0], 60).unwrap();
        assert!((d - 0.7303).abs() < 1e-9, "got {d}");
    }

    #[test]
    fn bisection_rejects_agreeing_endpoints() {
        let f = |_: &[f64]| 1u8;
        assert!(bisect_boundary(&f, &[0.0], &[1.0], 10).is_err());
    }

    #[test]
    fn nn_margin_of_two_points_is_half_the_gap() {
        // 1-NN boundary between two opposite-class points is the midpoint.
        let m = Matrix::from_rows(&[vec![0.0], vec![2.0]]).unwrap();
        let y = vec![0, 1];
        let margin = mean_nn_margin(&m, &y, 10, 60).unwrap();
        assert!((margin - 1.0).abs() < 1e-9, "got {margin}");
    }

    #[test]
    fn margin_grows_with_cluster_separation() {
        let tight = Matrix::from_rows(&[vec![0.0], vec![0.2], vec![1.0], vec![1.2]]).unwrap();
        let wide = Matrix::from_rows(&[vec![0.0], vec![0.2], vec![5.0], vec![5.2]]).unwrap();
        let y = vec![0, 0, 1, 1];
        let m_tight = mean_nn_margin(&tight, &y, 10, 60).unwrap();
        let m_wide = mean_nn_margin(&wide, &y, 10, 60).unwrap();
        assert!(m_wide > m_tight, "{m_wide} vs {m_tight}");
    }
}
