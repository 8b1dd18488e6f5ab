//! End-to-end tests of the `deepgnn` binary: exit codes, output schemas,
//! and byte-level determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_deepgnn"))
}

fn data_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../datasets")
}

fn run(args: &[&str]) -> Output {
    bin()
        .args(args)
        .env_remove("DEEPGNN_DATA_ROOT")
        .output()
        .expect("binary runs")
}

fn stdout_of(output: &Output) -> &str {
    std::str::from_utf8(&output.stdout).expect("utf-8 stdout")
}

fn root_arg() -> String {
    data_root().to_str().expect("utf-8 path").to_owned()
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_of(&out).contains("deepgnn"));
}

#[test]
fn missing_arguments_exit_one() {
    let out = run(&["train"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["sweep-depth", "--dataset", "toy"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_model_exits_one() {
    let out = run(&[
        "train",
        "--dataset",
        "toy",
        "--data-root",
        &root_arg(),
        "--model",
        "transformer",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown model"));
}

#[test]
fn dagnn_with_zero_hops_exits_one() {
    let out = run(&[
        "train",
        "--dataset",
        "toy",
        "--data-root",
        &root_arg(),
        "--model",
        "dagnn",
        "--k",
        "0",
        "--max-epochs",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k >= 1"));
}

#[test]
fn missing_dataset_exits_two() {
    let out = run(&["train", "--dataset", "no-such-dataset"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));
}

#[test]
fn corrupt_meta_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    for file in ["edges.txt", "features.csv", "labels.txt"] {
        std::fs::copy(data_root().join("toy").join(file), dir.path().join(file)).unwrap();
    }
    std::fs::write(
        dir.path().join("meta.json"),
        "{\"name\": \"toy\", \"n\": 8, \"m\": 999}",
    )
    .unwrap();
    let out = run(&[
        "train",
        "--dataset",
        dir.path().to_str().unwrap(),
        "--max-epochs",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("m"));
}

#[test]
fn dataset_resolves_through_env_root() {
    let out = bin()
        .args(["smoothness", "--dataset", "toy", "--k", "1"])
        .env("DEEPGNN_DATA_ROOT", data_root())
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn train_reports_deterministic_json() {
    let args = [
        "train",
        "--dataset",
        "toy",
        "--data-root",
        &root_arg(),
        "--model",
        "gcn",
        "--hidden",
        "8",
        "--max-epochs",
        "25",
        "--runs",
        "2",
        "--seed",
        "11",
        "--threads",
        "1",
        "--curves",
    ];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    let report: serde_json::Value = serde_json::from_str(stdout_of(&first)).unwrap();
    assert_eq!(report["model"], "gcn");
    assert_eq!(report["n_runs"], 2);
    assert_eq!(report["runs"][0]["seed"], 11);
    assert_eq!(report["runs"][1]["seed"], 12);
    assert!(report["runs"][0]["train_loss"].as_array().unwrap().len() <= 25);
}

#[test]
fn sweep_depth_emits_the_documented_schema() {
    let out = run(&[
        "sweep-depth",
        "--dataset",
        "toy",
        "--data-root",
        &root_arg(),
        "--model",
        "decoupled",
        "--depths",
        "0,2",
        "--runs",
        "1",
        "--hidden",
        "8",
        "--max-epochs",
        "10",
        "--split",
        "random",
        "--train-per-class",
        "2",
        "--val-count",
        "2",
        "--test-count",
        "rest",
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let lines: Vec<&str> = stdout_of(&out).lines().collect();
    assert_eq!(lines[0], "key,acc_mean,acc_std,smv_g");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,"));
    assert!(lines[2].starts_with("2,"));
}

#[test]
fn converge_emits_a_decreasing_residual_curve() {
    let out = run(&[
        "converge",
        "--graph",
        "path:3",
        "--kind",
        "rowavg",
        "--tol",
        "1e-6",
        "--max-k",
        "100",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let lines: Vec<&str> = stdout_of(&out).lines().collect();
    assert_eq!(lines[0], "k,frobenius_residual");
    let residuals: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(residuals.windows(2).all(|w| w[1] < w[0]));
    assert!(*residuals.last().unwrap() < 1e-6);
}

#[test]
fn converge_that_cannot_reach_tolerance_exits_three() {
    let out = run(&[
        "converge",
        "--graph",
        "path:30",
        "--tol",
        "1e-6",
        "--max-k",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(3));
    // The partial curve is still emitted for diagnosis.
    let lines: Vec<&str> = stdout_of(&out).lines().collect();
    assert_eq!(lines[0], "k,frobenius_residual");
    assert_eq!(lines.len(), 6);
}

#[test]
fn identical_features_have_zero_smoothness() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("meta.json"), "{\"name\": \"flat\"}").unwrap();
    std::fs::write(dir.path().join("edges.txt"), "0 1\n1 2\n").unwrap();
    std::fs::write(dir.path().join("features.csv"), "1,2\n1,2\n1,2\n").unwrap();
    std::fs::write(dir.path().join("labels.txt"), "0\n0\n1\n").unwrap();
    let out = run(&[
        "smoothness",
        "--dataset",
        dir.path().to_str().unwrap(),
        "--k",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let lines: Vec<&str> = stdout_of(&out).lines().collect();
    assert_eq!(lines[0], "layer_or_hop,smv_g,accuracy");
    for (hop, line) in lines[1..].iter().enumerate() {
        let mut fields = line.split(',');
        assert_eq!(fields.next().unwrap(), hop.to_string());
        let smv: f64 = fields.next().unwrap().parse().unwrap();
        assert!(smv < 1e-12, "hop {hop} has smv {smv}");
        assert_eq!(fields.next(), Some(""));
    }
}

#[test]
fn smoothness_with_checkpoint_fills_the_accuracy_column() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("model.ckpt");
    let trained = run(&[
        "train",
        "--dataset",
        "toy",
        "--data-root",
        &root_arg(),
        "--model",
        "decoupled",
        "--k",
        "2",
        "--hidden",
        "8",
        "--max-epochs",
        "20",
        "--save-model",
        ckpt.to_str().unwrap(),
    ]);
    assert_eq!(trained.status.code(), Some(0));
    let out = run(&[
        "smoothness",
        "--dataset",
        "toy",
        "--data-root",
        &root_arg(),
        "--k",
        "2",
        "--checkpoint",
        ckpt.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    for line in stdout_of(&out).lines().skip(1) {
        let acc = line.split(',').nth(2).unwrap();
        let value: f64 = acc.parse().expect("accuracy column is filled");
        assert!((0.0..=1.0).contains(&value));
    }
}

#[test]
fn gradcheck_passes_and_reports_every_model() {
    let out = run(&["gradcheck", "--samples", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(stdout_of(&out)).unwrap();
    assert_eq!(report["pass"], true);
    let names: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["model"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["mlp", "gcn_depth3", "decoupled_k5", "dagnn_k5"]);
}

#[test]
fn output_flag_writes_the_same_bytes_as_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    let direct = run(&["converge", "--graph", "cycle:6", "--max-k", "200"]);
    assert_eq!(direct.status.code(), Some(0));
    let filed = run(&[
        "converge",
        "--graph",
        "cycle:6",
        "--max-k",
        "200",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(filed.status.code(), Some(0));
    assert!(filed.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), direct.stdout);
}
