//! Run reports: JSON for machines, CSV for plotting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::probe::LayerProbe;
use crate::train::{EpochStats, TrainConfig};
use crate::{Error, Result};

/// Everything a training run produces besides the weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub config: TrainConfig,
    pub n_train: usize,
    pub n_test: usize,
    pub epochs: Vec<EpochStats>,
    pub test_loss: f64,
    pub test_accuracy: f64,
}

/// Per-layer probe results for one trained model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub knn_k: usize,
    pub layers: Vec<LayerProbe>,
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::Format(format!("json write: {e}")))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = File::open(path)?;
    serde_json::from_reader(f).map_err(|e| Error::Format(format!("json read: {e}")))
}

/// One row per probed layer, ready for any plotting tool. Optional columns
/// are left empty rather than faked.
pub fn probe_csv(report: &ProbeReport) -> String {
    let mut out = String::from(
        "layer,dim,knn_accuracy,linear_accuracy,svm_accuracy,local_dim,\
         mean_to_same,mean_to_other,separation_ratio,mean_margin\n",
    );
    for l in &report.layers {
        let svm = l.svm_accuracy.map_or(String::new(), |v| format!("{v}"));
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            l.layer,
            l.dim,
            l.knn_accuracy,
            l.linear_accuracy,
            svm,
            l.local_dim,
            l.separation.mean_to_same,
            l.separation.mean_to_other,
            l.separation.ratio,
            l.mean_margin,
        ));
    }
    out
}

pub fn save_probe_csv(path: &Path, report: &ProbeReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(probe_csv(report).as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Epoch-by-epoch training curve.
pub fn train_csv(report: &TrainReport) -> String {
    let mut out = String::from("epoch,loss,accuracy,seconds\n");
    for e in &report.epochs {
        out.push_str(&format!("{},{},{},{}\n", e.epoch, e.loss, e.accuracy, e.seconds));
    }
    out
}
