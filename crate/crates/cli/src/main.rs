//! Command line front end for the layerprobe library: generate datasets,
//! train models, evaluate them, and probe per-layer representations. Every
//! command is deterministic given its seed flags.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write as _};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::distr::{Distribution, Uniform};

use layerprobe::data::synthetic::{gratings, GratingSpec};
use layerprobe::data::{cifar, Dataset};
use layerprobe::nn::{check_gradients, uniform_cnn, LayerSpec, Network};
use layerprobe::preprocess::{contrast_normalize, ZcaWhitener};
use layerprobe::probe::{probe_layers, tap_features, ProbeConfig, SvmConfig};
use layerprobe::report::{self, ProbeReport, TrainReport};
use layerprobe::tensor::Tensor;
use layerprobe::train::{evaluate, train, TrainConfig};
use layerprobe::{io, rng};

#[derive(Parser)]
#[command(name = "layerprobe", version, about = "Train small CNNs and probe their layer representations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic oriented-grating dataset
    MakeData(MakeDataArgs),
    /// Train a CNN and save the model plus reports
    Train(TrainArgs),
    /// Evaluate a saved model on a dataset
    Eval(EvalArgs),
    /// Run per-layer representation probes on a saved model
    Probe(ProbeArgs),
    /// Compare analytic gradients against central differences
    Gradcheck(GradcheckArgs),
    /// Write one layer's activations for a dataset to a tensor file
    ExportFeatures(ExportFeaturesArgs),
    /// Describe a saved model
    Info(InfoArgs),
}

/// How a dataset directory is laid out.
#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum DataFormat {
    /// `images.tnsr`, `labels.tnsr`, `meta.json`, as written by `make-data`
    Tensor,
    /// CIFAR-10 binary batches (`data_batch_*.bin`, `test_batch.bin`)
    Cifar,
}

/// Which half of a CIFAR directory to read. Tensor datasets ignore this
/// because each directory holds exactly one split.
#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Split {
    Train,
    Test,
}

#[derive(Args)]
struct MakeDataArgs {
    /// Directory to create
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 512)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 24)]
    height: usize,
    #[arg(long, default_value_t = 24)]
    width: usize,
    /// Full grating periods across the image
    #[arg(long, default_value_t = 6.0)]
    cycles: f64,
    /// Additive pixel noise amplitude
    #[arg(long, default_value_t = 0.08)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset directory
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = DataFormat::Tensor)]
    format: DataFormat,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    split: Split,
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset directory
    #[arg(long)]
    train: PathBuf,
    /// Held-out dataset directory
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_enum, default_value_t = DataFormat::Tensor)]
    format: DataFormat,
    /// Where to write the model
    #[arg(long)]
    model: PathBuf,
    /// Optional JSON training report
    #[arg(long)]
    report: Option<PathBuf>,
    /// Optional CSV training curve
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Keep only the first N training samples
    #[arg(long)]
    limit: Option<usize>,
    /// Keep only the first N test samples
    #[arg(long)]
    test_limit: Option<usize>,
    /// Per-image contrast normalization before training
    #[arg(long)]
    contrast_normalize: bool,
    /// ZCA-whiten both splits with this ridge, fitted on the training split
    #[arg(long)]
    zca_eps: Option<f64>,
    /// Conv channels in the first block; later blocks double it
    #[arg(long, default_value_t = 8)]
    channels: usize,
    /// Number of conv/relu/pool blocks
    #[arg(long, default_value_t = 2)]
    blocks: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f32,
    #[arg(long, default_value_t = 0.9)]
    momentum: f32,
    #[arg(long, default_value_t = 1e-4)]
    weight_decay: f32,
    /// Multiplicative learning rate decay per epoch
    #[arg(long, default_value_t = 1.0)]
    lr_decay: f32,
    /// Seed for weight init and batch shuffling
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    /// Saved model file
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
}

#[derive(Args)]
struct ProbeArgs {
    /// Saved model file
    #[arg(long)]
    model: PathBuf,
    /// Training dataset directory (fits the probes)
    #[arg(long)]
    train: PathBuf,
    /// Held-out dataset directory (scores them)
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_enum, default_value_t = DataFormat::Tensor)]
    format: DataFormat,
    /// Keep only the first N training samples
    #[arg(long)]
    limit: Option<usize>,
    /// Keep only the first N test samples
    #[arg(long)]
    test_limit: Option<usize>,
    /// Optional JSON report
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// Optional CSV report
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    knn_k: usize,
    /// Spatial taps are mean-pooled to at most this grid before probing
    #[arg(long, default_value_t = 4)]
    max_spatial: usize,
    /// Reduce features to this dimension with PCA before probing
    #[arg(long)]
    pca_dim: Option<usize>,
    /// Also train a one-vs-rest SVM readout per layer
    #[arg(long)]
    svm: bool,
    /// Box constraint for the SVM readout
    #[arg(long, default_value_t = 1.0)]
    svm_c: f64,
    /// Probe only these taps (comma separated, e.g. input,relu1,dense1)
    #[arg(long, value_delimiter = ',')]
    taps: Option<Vec<String>>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum NetKind {
    /// Flatten plus two dense layers around a ReLU
    Dense,
    /// One conv/relu/pool block and a dense head
    Conv,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, value_enum, default_value_t = NetKind::Conv)]
    kind: NetKind,
    /// Central difference step; defaults to 1e-2 dense, 1e-3 conv
    #[arg(long)]
    step: Option<f32>,
    #[arg(long, default_value_t = 5e-4)]
    atol: f64,
    #[arg(long, default_value_t = 1e-2)]
    rtol: f64,
    /// Weight init seed; the defaults are known to sit clear of ReLU kinks
    /// and pooling ties, arbitrary seeds may fail spuriously
    #[arg(long)]
    net_seed: Option<u64>,
    /// Input batch seed
    #[arg(long, default_value_t = 12)]
    data_seed: u64,
}

#[derive(Args)]
struct ExportFeaturesArgs {
    /// Saved model file
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Tap name as listed by `info`, e.g. input, relu1, dense1
    #[arg(long)]
    tap: String,
    /// Output tensor file
    #[arg(long)]
    out: PathBuf,
    /// Export probe features (pooled to at most this grid) instead of the
    /// raw activation tensor
    #[arg(long)]
    pooled: Option<usize>,
}

#[derive(Args)]
struct InfoArgs {
    /// Saved model file
    #[arg(long)]
    model: PathBuf,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct DatasetMeta {
    classes: usize,
}

fn save_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))?;
    io::save_tensor(&dir.join("images.tnsr"), &data.images)?;
    let labels: Vec<u32> = data.labels.iter().map(|&l| l as u32).collect();
    let mut w = BufWriter::new(File::create(dir.join("labels.tnsr"))?);
    io::write_u32_vec(&mut w, &labels)?;
    w.flush()?;
    report::save_json(&dir.join("meta.json"), &DatasetMeta { classes: data.num_classes })?;
    Ok(())
}

fn load_tensor_dataset(dir: &Path) -> Result<Dataset> {
    let images = io::load_tensor(&dir.join("images.tnsr"))
        .with_context(|| format!("reading {}", dir.join("images.tnsr").display()))?;
    let mut r = BufReader::new(
        File::open(dir.join("labels.tnsr"))
            .with_context(|| format!("opening {}", dir.join("labels.tnsr").display()))?,
    );
    let raw = io::read_u32_vec(&mut r)?;
    let mut labels = Vec::with_capacity(raw.len());
    for (i, &l) in raw.iter().enumerate() {
        if l > u8::MAX as u32 {
            bail!("label {l} at row {i} does not fit in a byte");
        }
        labels.push(l as u8);
    }
    let meta: DatasetMeta = report::load_json(&dir.join("meta.json"))?;
    Ok(Dataset::new(images, labels, meta.classes)?)
}

fn load_split(dir: &Path, format: DataFormat, split: Split) -> Result<Dataset> {
    match format {
        DataFormat::Tensor => load_tensor_dataset(dir),
        DataFormat::Cifar => {
            let files: Vec<PathBuf> = match split {
                Split::Train => cifar::TRAIN_FILES.iter().map(|f| dir.join(f)).collect(),
                Split::Test => vec![dir.join(cifar::TEST_FILE)],
            };
            let refs: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
            Ok(cifar::load_files(&refs)?)
        }
    }
}

fn cmd_make_data(a: &MakeDataArgs) -> Result<()> {
    let spec = GratingSpec {
        n: a.n,
        classes: a.classes,
        channels: 1,
        height: a.height,
        width: a.width,
        cycles: a.cycles,
        noise: a.noise,
        seed: a.seed,
    };
    let data = gratings(&spec)?;
    save_dataset(&a.out, &data)?;
    let (c, h, w) = data.image_dims();
    println!(
        "wrote {} samples ({c}x{h}x{w}, {} classes) to {}",
        data.len(),
        data.num_classes,
        a.out.display()
    );
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let mut train_set = load_split(&a.train, a.format, Split::Train)?;
    let mut test_set = load_split(&a.test, a.format, Split::Test)?;
    if let Some(n) = a.limit {
        train_set = train_set.take(n);
    }
    if let Some(n) = a.test_limit {
        test_set = test_set.take(n);
    }
    if a.contrast_normalize {
        contrast_normalize(&mut train_set.images, 1e-6);
        contrast_normalize(&mut test_set.images, 1e-6);
    }
    if let Some(eps) = a.zca_eps {
        let zca = ZcaWhitener::fit(&train_set.to_rows(), eps)?;
        zca.apply_to_dataset(&mut train_set)?;
        zca.apply_to_dataset(&mut test_set)?;
    }
    let (c, _, _) = train_set.image_dims();
    let specs = uniform_cnn(c, a.channels, a.blocks, train_set.num_classes);
    let mut net = Network::new(&specs, a.seed)?;
    println!(
        "training {} params on {} samples ({} epochs, seed {})",
        net.num_params(),
        train_set.len(),
        a.epochs,
        a.seed
    );
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        lr: a.lr,
        momentum: a.momentum,
        weight_decay: a.weight_decay,
        lr_decay: a.lr_decay,
        seed: a.seed,
    };
    let epochs = train(&mut net, &train_set, &cfg)?;
    for e in &epochs {
        println!(
            "epoch {:>3}  loss {:.4}  accuracy {:.3}  ({:.2}s)",
            e.epoch, e.loss, e.accuracy, e.seconds
        );
    }
    let (test_loss, test_accuracy) = evaluate(&mut net, &test_set, a.batch_size.max(1))?;
    println!("test loss {test_loss:.4}  accuracy {test_accuracy:.3}");
    io::save_model(&a.model, &net)?;
    println!("model written to {}", a.model.display());
    let summary = TrainReport {
        seed: a.seed,
        config: cfg,
        n_train: train_set.len(),
        n_test: test_set.len(),
        epochs,
        test_loss,
        test_accuracy,
    };
    if let Some(path) = &a.report {
        report::save_json(path, &summary)?;
    }
    if let Some(path) = &a.curve {
        std::fs::write(path, report::train_csv(&summary))?;
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let mut net = io::load_model(&a.model)?;
    let data = load_split(&a.data.data, a.data.format, a.data.split)?;
    let (loss, accuracy) = evaluate(&mut net, &data, a.batch_size.max(1))?;
    println!("loss {loss:.4}  accuracy {accuracy:.3}  ({} samples)", data.len());
    Ok(())
}

fn cmd_probe(a: &ProbeArgs) -> Result<()> {
    let mut net = io::load_model(&a.model)?;
    let mut train_set = load_split(&a.train, a.format, Split::Train)?;
    let mut test_set = load_split(&a.test, a.format, Split::Test)?;
    if let Some(n) = a.limit {
        train_set = train_set.take(n);
    }
    if let Some(n) = a.test_limit {
        test_set = test_set.take(n);
    }
    let mut cfg = ProbeConfig {
        knn_k: a.knn_k,
        max_spatial: a.max_spatial,
        pca_dim: a.pca_dim,
        taps: a.taps.clone(),
        ..ProbeConfig::default()
    };
    if a.svm {
        cfg.svm = Some(SvmConfig { c: a.svm_c, ..SvmConfig::default() });
    }
    let layers = probe_layers(&mut net, &train_set, &test_set, &cfg)?;
    println!(
        "{:<10} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7} {:>9}",
        "layer", "dim", "knn", "linear", "svm", "ldim", "sep", "margin"
    );
    for l in &layers {
        let svm = l
            .svm_accuracy
            .map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        println!(
            "{:<10} {:>6} {:>7.3} {:>7.3} {:>7} {:>7.2} {:>7.3} {:>9.4}",
            l.layer,
            l.dim,
            l.knn_accuracy,
            l.linear_accuracy,
            svm,
            l.local_dim,
            l.separation.ratio,
            l.mean_margin
        );
    }
    let out = ProbeReport {
        seed: cfg.linear.seed,
        n_train: train_set.len(),
        n_test: test_set.len(),
        knn_k: cfg.knn_k,
        layers,
    };
    if let Some(path) = &a.out_json {
        report::save_json(path, &out)?;
    }
    if let Some(path) = &a.out_csv {
        report::save_probe_csv(path, &out)?;
    }
    Ok(())
}

fn cmd_gradcheck(a: &GradcheckArgs) -> Result<()> {
    let (specs, h, net_seed, batch) = match a.kind {
        NetKind::Dense => (
            vec![
                LayerSpec::Flatten,
                LayerSpec::Dense { inputs: 9, outputs: 6 },
                LayerSpec::Relu,
                LayerSpec::Dense { inputs: 6, outputs: 3 },
            ],
            a.step.unwrap_or(1e-2),
            a.net_seed.unwrap_or(41),
            (6usize, 3usize),
        ),
        NetKind::Conv => (
            uniform_cnn(1, 2, 1, 3),
            a.step.unwrap_or(1e-3),
            a.net_seed.unwrap_or(8),
            (3usize, 4usize),
        ),
    };
    let mut net = Network::new(&specs, net_seed)?;
    let (n, hw) = batch;
    let mut r = rng::seeded(a.data_seed);
    let dist = Uniform::new(0.0f32, 1.0).expect("constant range");
    let data: Vec<f32> = (0..n * hw * hw).map(|_| dist.sample(&mut r)).collect();
    let images = Tensor::new(vec![n, 1, hw, hw], data)?;
    let labels: Vec<u8> = (0..n).map(|i| (i % 3) as u8).collect();
    let rep = check_gradients(&mut net, &images, &labels, h, a.atol, a.rtol)?;
    println!(
        "checked {} params  max score {:.4}  max abs err {:.2e}  mean abs err {:.2e}  worst {}",
        rep.checked, rep.max_score, rep.max_abs_err, rep.mean_abs_err, rep.worst
    );
    if !rep.passed() {
        bail!("gradient check failed (max score {:.4} > 1)", rep.max_score);
    }
    println!("pass");
    Ok(())
}

fn cmd_export_features(a: &ExportFeaturesArgs) -> Result<()> {
    let mut net = io::load_model(&a.model)?;
    let data = load_split(&a.data.data, a.data.format, a.data.split)?;
    let taps = net.forward_taps(&data.images)?;
    let tap = taps.iter().find(|t| t.name == a.tap).with_context(|| {
        let names: Vec<&str> = taps.iter().map(|t| t.name.as_str()).collect();
        format!("no tap named {:?}; available: {}", a.tap, names.join(", "))
    })?;
    let out = match a.pooled {
        Some(grid) => {
            let feats = tap_features(&tap.tensor, grid.max(1));
            let data: Vec<f32> = (0..feats.rows())
                .flat_map(|i| feats.row(i).iter().map(|&v| v as f32).collect::<Vec<_>>())
                .collect();
            Tensor::new(vec![feats.rows(), feats.cols()], data)?
        }
        None => tap.tensor.clone(),
    };
    io::save_tensor(&a.out, &out)?;
    let dims: Vec<String> = out.shape().iter().map(|d| d.to_string()).collect();
    println!("wrote {} [{}] to {}", a.tap, dims.join("x"), a.out.display());
    Ok(())
}

fn cmd_info(a: &InfoArgs) -> Result<()> {
    let net = io::load_model(&a.model)?;
    println!("layers:");
    for spec in net.specs() {
        println!("  {}", serde_json::to_string(spec)?);
    }
    println!("parameters: {}", net.num_params());
    let names = net.param_names();
    let shapes: Vec<Vec<usize>> = net.weights().iter().map(|t| t.shape().to_vec()).collect();
    for (name, shape) in names.iter().zip(&shapes) {
        let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
        println!("  {name:<12} [{}]", dims.join("x"));
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::MakeData(a) => cmd_make_data(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Probe(a) => cmd_probe(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::ExportFeatures(a) => cmd_export_features(a),
        Command::Info(a) => cmd_info(a),
    }
}
