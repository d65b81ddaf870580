//! Layerwise representation probes.
//!
//! A trained network is run over a probe split and every tapped activation
//! becomes a feature matrix. Each matrix is scored the same way: exact kNN
//! and linear readout accuracy (optionally an SVM readout), a local
//! intrinsic dimension estimate, class separation statistics, and the mean
//! distance to the 1-NN decision boundary. Comparing the scores across
//! depth shows where the representation becomes linearly separable.

pub mod knn;
pub mod linear;
pub mod margin;
pub mod pca;
pub mod svm;

pub use knn::Knn;
pub use linear::{linear_probe_accuracy, LinearProbeConfig};
pub use margin::{mean_nn_margin, separation_stats, SeparationStats};
pub use pca::{local_intrinsic_dim, Pca};
pub use svm::{BinarySvm, Kernel, OvrSvm, SvmConfig};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::linalg::Matrix;
use crate::nn::{Network, Tap};
use crate::tensor::Tensor;
use crate::Result;

/// Turns one tapped activation into per-sample feature rows.
///
/// 4-D activations are average-pooled down to at most `max_spatial` cells
/// per side (adaptive bins, so any input size works), then flattened to
/// `c * g * g` features. Anything else keeps its trailing dimensions as-is.
pub fn tap_features(t: &Tensor, max_spatial: usize) -> Matrix {
    assert!(max_spatial > 0, "max_spatial must be positive");
    let shape = t.shape();
    if shape.len() == 4 {
        let (n, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
        let gh = h.min(max_spatial);
        let gw = w.min(max_spatial);
        let mut out = Matrix::zeros(n, c * gh * gw);
        let x = t.data();
        for i in 0..n {
            for ch in 0..c {
                let base = (i * c + ch) * h * w;
                for bh in 0..gh {
                    let (r0, r1) = (bh * h / gh, (bh + 1) * h / gh);
                    for bw in 0..gw {
                        let (c0, c1) = (bw * w / gw, (bw + 1) * w / gw);
                        let mut acc = 0.0f64;
                        for r in r0..r1 {
                            for cc in c0..c1 {
                                acc += x[base + r * w + cc] as f64;
                            }
                        }
                        let cells = ((r1 - r0) * (c1 - c0)) as f64;
                        out.set(i, (ch * gh + bh) * gw + bw, acc / cells);
                    }
                }
            }
        }
        out
    } else {
        let n = t.batch();
        let d = t.sample_len();
        let mut out = Matrix::zeros(n, d);
        for i in 0..n {
            for (j, &v) in t.sample(i).iter().enumerate() {
                out.set(i, j, v as f64);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Spatial grid cap for feature pooling.
    pub max_spatial: usize,
    /// Optional PCA reduction of the pooled features before scoring.
    pub pca_dim: Option<usize>,
    pub knn_k: usize,
    pub linear: LinearProbeConfig,
    /// `None` skips the SVM readout, which dominates probe runtime.
    pub svm: Option<SvmConfig>,
    pub local_dim_k: usize,
    pub local_dim_threshold: f64,
    /// How many samples contribute a bisection margin.
    pub margin_cap: usize,
    pub margin_iters: usize,
    /// Tap names to probe; `None` selects the input, every relu/pool/gap
    /// output, and the final layer.
    pub taps: Option<Vec<String>>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            max_spatial: 4,
            pca_dim: None,
            knn_k: 5,
            linear: LinearProbeConfig::default(),
            svm: None,
            local_dim_k: 10,
            local_dim_threshold: 0.9,
            margin_cap: 64,
            margin_iters: 50,
            taps: None,
        }
    }
}

/// Scores for one tapped layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerProbe {
    pub layer: String,
    /// Feature dimension actually scored (after pooling and PCA).
    pub dim: usize,
    pub knn_accuracy: f64,
    pub linear_accuracy: f64,
    pub svm_accuracy: Option<f64>,
    pub local_dim: f64,
    pub separation: SeparationStats,
    pub mean_margin: f64,
}

fn default_tap(name: &str, is_last: bool) -> bool {
    is_last
        || name == "input"
        || name.starts_with("relu")
        || name.starts_with("pool")
        || name.starts_with("gap")
}

/// Runs every probe against every selected tap. Train features fit the
/// probes, test features score them; margins, separation, and local
/// dimension are measured on the train split.
pub fn probe_layers(
    net: &mut Network,
    train: &Dataset,
    test: &Dataset,
    cfg: &ProbeConfig,
) -> Result<Vec<LayerProbe>> {
    if train.num_classes != test.num_classes {
        return Err(crate::Error::InvalidArgument(
            "probe: class counts differ between splits".into(),
        ));
    }
    let taps_tr = net.forward_taps(&train.images)?;
    let taps_te = net.forward_taps(&test.images)?;
    let last = taps_tr.len() - 1;
    let selected: Vec<usize> = (0..taps_tr.len())
        .filter(|&i| match &cfg.taps {
            Some(names) => names.iter().any(|n| n == &taps_tr[i].name),
            None => default_tap(&taps_tr[i].name, i == last),
        })
        .collect();
    if selected.is_empty() {
        return Err(crate::Error::InvalidArgument(
            "probe: no taps selected".into(),
        ));
    }
    let mut out = Vec::with_capacity(selected.len());
    for &i in &selected {
        out.push(probe_one(
            &taps_tr[i],
            &taps_te[i],
            &train.labels,
            &test.labels,
            train.num_classes,
            cfg,
        )?);
    }
    Ok(out)
}

fn probe_one(
    tap_tr: &Tap,
    tap_te: &Tap,
    train_y: &[u8],
    test_y: &[u8],
    classes: usize,
    cfg: &ProbeConfig,
) -> Result<LayerProbe> {
    let mut ftr = tap_features(&tap_tr.tensor, cfg.max_spatial);
    let mut fte = tap_features(&tap_te.tensor, cfg.max_spatial);
    if let Some(m) = cfg.pca_dim {
        let m = m.min(ftr.cols()).min(ftr.rows());
        if m > 0 && m < ftr.cols() {
            let pca = Pca::fit(&ftr, m)?;
            ftr = pca.transform(&ftr)?;
            fte = pca.transform(&fte)?;
        }
    }
    let knn = Knn::new(&ftr, train_y);
    let knn_accuracy = knn.accuracy_on(&fte, test_y, cfg.knn_k);
    let linear_accuracy =
        linear_probe_accuracy(&ftr, train_y, &fte, test_y, classes, &cfg.linear)?;
    let svm_accuracy = match &cfg.svm {
        Some(scfg) => {
            // Deep taps carry logit-scale features while early taps sit in
            // [0, 1]. Standardizing with training statistics keeps the fixed
            // box constraint and tolerance meaningful at every depth, same as
            // the linear readout does internally.
            let std = linear::Standardizer::fit(&ftr);
            let svm = OvrSvm::train(&std.to_matrix(&ftr), train_y, classes, scfg)?;
            Some(svm.accuracy_on(&std.to_matrix(&fte), test_y))
        }
        None => None,
    };
    let k = cfg.local_dim_k.min(ftr.rows().saturating_sub(1));
    let local_dim = local_intrinsic_dim(&ftr, k, cfg.local_dim_threshold)?;
    let separation = separation_stats(&ftr, train_y);
    let mean_margin = mean_nn_margin(&ftr, train_y, cfg.margin_cap, cfg.margin_iters)?;
    Ok(LayerProbe {
        layer: tap_tr.name.clone(),
        dim: ftr.cols(),
        knn_accuracy,
        linear_accuracy,
        svm_accuracy,
        local_dim,
        separation,
        mean_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::{gratings, GratingSpec};
    use crate::nn::uniform_cnn;

    #[test]
    fn pooling_averages_adaptive_bins() {
        // 1x1x4x4 pooled to 2x2: each bin is the mean of a 2x2 quadrant.
        let t = Tensor::new(
            vec![1, 1, 4, 4],
            vec![
                1.0, 2.0, 5.0, 6.0, //
                3.0, 4.0, 7.0, 8.0, //
                9.0, 10.0, 13.0, 14.0, //
                11.0, 12.0, 15.0, 16.0,
            ],
        ).unwrap();
        let m = tap_features(&t, 2);
        assert_eq!((m.rows(), m.cols()), (1, 4));
        assert_eq!(m.row(0), &[2.5, 6.5, 10.5, 14.5]);
    }

    #[test]
    fn small_maps_are_left_unpooled() {
        let t = Tensor::new(vec![2, 3, 2, 2], (0..24).map(|v| v as f32).collect()).unwrap();
        let m = tap_features(&t, 4);
        assert_eq!((m.rows(), m.cols()), (2, 12));
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.get(1, 11), 23.0);
    }

    #[test]
    fn flat_activations_pass_through() {
        let t = Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let m = tap_features(&t, 4);
        assert_eq!(m.row(1), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn default_selection_and_scores_on_tiny_gratings() {
        let spec = GratingSpec {
            n: 80,
            classes: 2,
            channels: 1,
            height: 8,
            width: 8,
            cycles: 2.0,
            noise: 0.05,
            seed: 60,
        };
        let train = gratings(&spec).unwrap();
        let test = gratings(&GratingSpec { n: 40, seed: 61, ..spec }).unwrap();
        let mut net = Network::new(&uniform_cnn(1, 4, 1, 2), 3).unwrap();
        let cfg = ProbeConfig {
            linear: LinearProbeConfig {
                epochs: 10,
                ..LinearProbeConfig::default()
            },
            margin_cap: 16,
            ..ProbeConfig::default()
        };
        let probes = probe_layers(&mut net, &train, &test, &cfg).unwrap();
        let names: Vec<&str> = probes.iter().map(|p| p.layer.as_str()).collect();
        assert_eq!(names, ["input", "relu1", "pool1", "gap1", "dense1"]);
        for p in &probes {
            assert!(p.dim > 0);
            assert!((0.0..=1.0).contains(&p.knn_accuracy), "{p:?}");
            assert!((0.0..=1.0).contains(&p.linear_accuracy));
            assert!(p.local_dim >= 0.0);
            assert!(p.mean_margin.is_finite());
        }
        // The input tap pools 8x8 down to a 4x4 grid over one channel.
        assert_eq!(probes[0].dim, 16);
        assert_eq!(probes[3].dim, 4);
    }

    #[test]
    fn explicit_tap_list_is_respected() {
        let spec = GratingSpec {
            n: 40,
            classes: 2,
            channels: 1,
            height: 8,
            width: 8,
            cycles: 2.0,
            noise: 0.05,
            seed: 62,
        };
        let train = gratings(&spec).unwrap();
        let test = gratings(&GratingSpec { n: 20, seed: 63, ..spec }).unwrap();
        let mut net = Network::new(&uniform_cnn(1, 4, 1, 2), 3).unwrap();
        let cfg = ProbeConfig {
            taps: Some(vec!["conv1".to_string()]),
            linear: LinearProbeConfig {
                epochs: 5,
                ..LinearProbeConfig::default()
            },
            margin_cap: 8,
            ..ProbeConfig::default()
        };
        let probes = probe_layers(&mut net, &train, &test, &cfg).unwrap();
        assert_eq!(probes.len(), 1);
        assert_eq!(probes[0].layer, "conv1");
    }
}
