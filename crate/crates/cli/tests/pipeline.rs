//! Drives the compiled binary through the full workflow in a temp
//! directory: data generation, training, evaluation, probing, gradient
//! checking, and feature export.

use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_layerprobe"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("stdout should be utf8")
}

fn make_data(dir: &Path, out: &str, n: &str, seed: &str) {
    run_ok(
        dir,
        &[
            "make-data", "--out", out, "--n", n, "--classes", "3", "--height", "16",
            "--width", "16", "--cycles", "4", "--seed", seed,
        ],
    );
}

#[test]
fn full_pipeline_runs_in_a_tempdir() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    make_data(dir, "train", "96", "1");
    make_data(dir, "test", "48", "2");

    let train_out = run_ok(
        dir,
        &[
            "train", "--train", "train", "--test", "test", "--model", "model.lpmd",
            "--report", "report.json", "--curve", "curve.csv", "--channels", "4",
            "--blocks", "1", "--epochs", "3", "--seed", "5",
        ],
    );
    assert!(train_out.contains("test loss"), "{train_out}");
    assert!(dir.join("model.lpmd").exists());

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 5);
    assert_eq!(report["n_train"], 96);
    assert_eq!(report["epochs"].as_array().unwrap().len(), 3);
    let curve = std::fs::read_to_string(dir.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 3, "header plus one row per epoch");

    let eval_out = run_ok(dir, &["eval", "--model", "model.lpmd", "--data", "test"]);
    assert!(eval_out.contains("accuracy"), "{eval_out}");
    assert!(eval_out.contains("48 samples"), "{eval_out}");

    let probe_out = run_ok(
        dir,
        &[
            "probe", "--model", "model.lpmd", "--train", "train", "--test", "test",
            "--svm", "--out-csv", "probe.csv", "--out-json", "probe.json",
        ],
    );
    assert!(probe_out.contains("input"), "{probe_out}");
    assert!(probe_out.contains("dense1"), "{probe_out}");
    let csv = std::fs::read_to_string(dir.join("probe.csv")).unwrap();
    assert!(csv.starts_with("layer,dim,knn_accuracy"), "{csv}");
    assert!(csv.lines().count() >= 4, "expected several probed layers:\n{csv}");
    let probe: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("probe.json")).unwrap()).unwrap();
    assert_eq!(probe["n_test"], 48);

    let grad_out = run_ok(dir, &["gradcheck"]);
    assert!(grad_out.contains("pass"), "{grad_out}");

    run_ok(
        dir,
        &[
            "export-features", "--model", "model.lpmd", "--data", "test",
            "--tap", "gap1", "--out", "gap.tnsr",
        ],
    );
    let t = layerprobe::io::load_tensor(&dir.join("gap.tnsr")).unwrap();
    assert_eq!(t.shape()[0], 48);
    assert_eq!(t.numel(), 48 * 4, "one pooled value per channel");

    let info_out = run_ok(dir, &["info", "--model", "model.lpmd"]);
    assert!(info_out.contains("parameters: 55"), "{info_out}");
    assert!(info_out.contains("conv1.w"), "{info_out}");
}

#[test]
fn training_twice_with_one_seed_matches_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    make_data(dir, "train", "64", "1");
    make_data(dir, "test", "32", "2");
    let train = |model: &str, seed: &str| {
        run_ok(
            dir,
            &[
                "train", "--train", "train", "--test", "test", "--model", model,
                "--channels", "4", "--blocks", "1", "--epochs", "2", "--seed", seed,
            ],
        );
    };
    train("a.lpmd", "7");
    train("b.lpmd", "7");
    train("c.lpmd", "8");
    let a = std::fs::read(dir.join("a.lpmd")).unwrap();
    let b = std::fs::read(dir.join("b.lpmd")).unwrap();
    let c = std::fs::read(dir.join("c.lpmd")).unwrap();
    assert_eq!(a, b, "same seed must reproduce the model exactly");
    assert_ne!(a, c, "different seeds must not collide");
}

#[test]
fn bad_inputs_fail_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = run(dir, &["eval", "--model", "missing.lpmd", "--data", "nowhere"]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());

    make_data(dir, "train", "8", "1");
    // Corrupt the image container and make sure loading rejects it.
    let img = dir.join("train").join("images.tnsr");
    let mut bytes = std::fs::read(&img).unwrap();
    bytes[0] ^= 0xff;
    std::fs::write(&img, bytes).unwrap();
    let out = run(
        dir,
        &[
            "train", "--train", "train", "--test", "train", "--model", "m.lpmd",
            "--epochs", "1",
        ],
    );
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("magic"), "unexpected error text: {stderr}");
}
