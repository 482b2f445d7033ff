//! End-to-end runs of the `qcnn` binary: outputs, overrides and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn qcnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcnn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn synth(dir: &Path) -> String {
    let csv = dir.join("flows.csv");
    let out = qcnn(&["synth", "--scale", "0.001", "--seed", "3", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    csv.to_string_lossy().into_owned()
}

fn names(dir: &Path) -> Vec<String> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn train_then_replay_reproduces_reports() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth(dir.path());
    let out = dir.path().join("run");
    let status = qcnn(&[
        "train", "--variant", "cnn,quanvolution", "--experiment", "e1", "--data", &csv,
        "--epochs", "2", "--repeats", "2", "--seed", "4", "--subsample", "300",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let files = names(&out);
    for want in [
        "aggregate.json", "manifest.json", "timing.json",
        "run_cnn_00.json", "run_cnn_01.json", "run_quanvolution_00.json",
        "curves_run_cnn_00.csv",
    ] {
        assert!(files.iter().any(|f| f == want), "missing {want} in {files:?}");
    }
    let curves = std::fs::read_to_string(out.join("curves_run_cnn_00.csv")).unwrap();
    assert_eq!(curves.lines().count(), 3);

    let again = dir.path().join("again");
    let status = qcnn(&[
        "replay", "--manifest", out.join("manifest.json").to_str().unwrap(),
        "--out", again.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    for f in ["aggregate.json", "run_cnn_01.json", "run_quanvolution_01.json"] {
        assert_eq!(std::fs::read(out.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth(dir.path());
    let cfg = dir.path().join("cfg.json");
    let out = dir.path().join("out");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"variant": "cnn", "epochs": 9, "repeats": 1, "subsample": 250, "data": {:?}, "out": {:?}}}"#,
            csv,
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let status = qcnn(&["train", "--config", cfg.to_str().unwrap(), "--epochs", "1"]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["epochs"], 1);
    assert_eq!(manifest["config"]["subsample"], 250);
    assert_eq!(manifest["config"]["variants"], serde_json::json!(["cnn"]));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth(dir.path());
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();

    let code = |args: &[&str]| qcnn(args).status.code().unwrap();
    assert_eq!(code(&["train", "--data", &csv, "--epochs", "0", "--out", out]), 2);
    assert_eq!(code(&["train", "--data", &csv, "--variant", "lstm", "--out", out]), 2);
    assert_eq!(code(&["train", "--data", &csv, "--experiment", "e9", "--out", out]), 2);
    assert_eq!(code(&["train", "--out", out]), 2);
    assert_eq!(code(&["train", "--data", "/nonexistent/flows.csv", "--out", out]), 3);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b\n1,2\n").unwrap();
    assert_eq!(code(&["train", "--data", bad.to_str().unwrap(), "--out", out]), 3);

    // A restart policy no run can satisfy leaves every run unsuccessful.
    let cfg = dir.path().join("strict.json");
    std::fs::write(
        &cfg,
        r#"{"epochs": 2, "repeats": 2, "subsample": 200,
            "restart": {"check_epoch": 1, "min_train_accuracy": 1.5, "max_restarts": 1}}"#,
    )
    .unwrap();
    assert_eq!(code(&["train", "--config", cfg.to_str().unwrap(), "--data", &csv, "--out", out]), 4);

    let manifest = dir.path().join("nope.json");
    std::fs::write(&manifest, "{}").unwrap();
    assert_eq!(code(&["replay", "--manifest", manifest.to_str().unwrap()]), 2);
}
