//! Black-box tests of the command-line contract: exit codes, artifact
//! layout, and the error-path diagnostics.

use assert_cmd::Command;
use predicates::prelude::*;
use std::path::Path;

fn cmd() -> Command {
    Command::cargo_bin("funssn").unwrap()
}

fn write_cfg(dir: &Path, value: serde_json::Value) -> String {
    let path = dir.join("cfg.json");
    std::fs::write(&path, serde_json::to_string_pretty(&value).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn sim_cfg(dir: &Path) -> serde_json::Value {
    serde_json::json!({
        "sim": {"n": 12, "r": 15, "q": 10, "j": 2, "snr": 2.0, "seed": 4},
        "data": {
            "predictors": [
                dir.join("sim/x1.csv").to_str().unwrap(),
                dir.join("sim/x2.csv").to_str().unwrap()
            ],
            "outcome": dir.join("sim/y.csv").to_str().unwrap()
        },
        "model": {"k_basis": 6, "u_basis": 6},
        "train": {"max_epochs": 3, "patience": 3}
    })
}

#[test]
fn simulate_writes_declared_files_and_creates_out_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), sim_cfg(tmp.path()));
    let out = tmp.path().join("made/by/the/run");
    cmd()
        .args(["--config", &cfg, "--out-dir", out.to_str().unwrap(), "simulate"])
        .assert()
        .success()
        .stdout(predicate::str::contains("simulate:"));
    for file in [
        "x1.csv",
        "x2.csv",
        "y.csv",
        "truth_surface.csv",
        "truth_noiseless.csv",
        "sim_config.json",
        "config.json",
    ] {
        assert!(out.join(file).exists(), "{file} missing");
    }
    // declared shapes: n rows, R columns
    let x1 = std::fs::read_to_string(out.join("x1.csv")).unwrap();
    assert_eq!(x1.lines().count(), 12);
    assert_eq!(x1.lines().next().unwrap().split(',').count(), 15);
    let y = std::fs::read_to_string(out.join("y.csv")).unwrap();
    assert_eq!(y.lines().count(), 12);
    assert_eq!(y.lines().next().unwrap().split(',').count(), 10);
}

#[test]
fn invalid_snr_is_a_config_error_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = sim_cfg(tmp.path());
    cfg["sim"]["snr"] = serde_json::json!(0.0);
    let cfg = write_cfg(tmp.path(), cfg);
    cmd()
        .args(["--config", &cfg, "simulate"])
        .current_dir(tmp.path())
        .assert()
        .code(1)
        .stderr(predicate::str::contains("snr"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = sim_cfg(tmp.path());
    cfg["sim"]["snrr"] = serde_json::json!(1.0);
    let cfg = write_cfg(tmp.path(), cfg);
    cmd()
        .args(["--config", &cfg, "simulate"])
        .assert()
        .code(1)
        .stderr(predicate::str::contains("unknown field"));
}

#[test]
fn missing_dataset_file_is_an_io_error_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), sim_cfg(tmp.path()));
    cmd()
        .args(["--config", &cfg, "fit"])
        .current_dir(tmp.path())
        .assert()
        .code(3);
}

#[test]
fn malformed_csv_is_a_usage_error_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::create_dir(tmp.path().join("sim")).unwrap();
    std::fs::write(tmp.path().join("sim/x1.csv"), "1,2\n3,oops\n").unwrap();
    std::fs::write(tmp.path().join("sim/x2.csv"), "1,2\n3,4\n").unwrap();
    std::fs::write(tmp.path().join("sim/y.csv"), "1,2\n3,4\n").unwrap();
    let cfg = write_cfg(tmp.path(), sim_cfg(tmp.path()));
    cmd()
        .args(["--config", &cfg, "fit"])
        .assert()
        .code(1)
        .stderr(predicate::str::contains("row"));
}

#[test]
fn usage_error_without_subcommand() {
    cmd().assert().code(1);
}

#[test]
fn full_pipeline_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), sim_cfg(tmp.path()));
    let dir = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();

    cmd()
        .args(["--config", &cfg, "--out-dir", &dir("sim"), "simulate"])
        .assert()
        .success();
    cmd()
        .args(["--config", &cfg, "--out-dir", &dir("fit"), "fit"])
        .assert()
        .success();
    let ckpt = tmp.path().join("fit/model.json");
    assert!(ckpt.exists());
    assert!(tmp.path().join("fit/train_log.jsonl").exists());
    assert!(tmp.path().join("fit/metrics.json").exists());

    let ckpt_arg = ckpt.to_str().unwrap().to_string();
    cmd()
        .args([
            "--config",
            &cfg,
            "--out-dir",
            &dir("pred"),
            "predict",
            "--checkpoint",
            &ckpt_arg,
        ])
        .assert()
        .success();
    cmd()
        .args([
            "--config",
            &cfg,
            "--out-dir",
            &dir("eval"),
            "evaluate",
            "--predictions",
            tmp.path().join("pred/predictions.csv").to_str().unwrap(),
        ])
        .assert()
        .success();
    let eval: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("eval/eval.json")).unwrap())
            .unwrap();
    assert!(eval["functional_r2"].is_number());
    assert!(tmp.path().join("eval/per_curve.csv").exists());

    cmd()
        .args([
            "--config",
            &cfg,
            "--out-dir",
            &dir("surf"),
            "surfaces",
            "--checkpoint",
            &ckpt_arg,
        ])
        .assert()
        .success();
    assert!(tmp.path().join("surf/surface_term1.csv").exists());
    assert!(tmp.path().join("surf/surface_term2.csv").exists());
    assert!(tmp.path().join("surf/intercept.csv").exists());
}

#[test]
fn pho_on_deep_free_checkpoint_warns_and_noops() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), sim_cfg(tmp.path()));
    let dir = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();
    cmd()
        .args(["--config", &cfg, "--out-dir", &dir("sim"), "simulate"])
        .assert()
        .success();
    cmd()
        .args(["--config", &cfg, "--out-dir", &dir("fit"), "fit"])
        .assert()
        .success();
    cmd()
        .args([
            "--config",
            &cfg,
            "--out-dir",
            &dir("pho"),
            "pho",
            "--checkpoint",
            tmp.path().join("fit/model.json").to_str().unwrap(),
        ])
        .assert()
        .success()
        .stderr(predicate::str::contains("no deep part"));
    // surfaces written unchanged, no corrected artifacts
    assert!(tmp.path().join("pho/surface_term1.csv").exists());
    assert!(!tmp.path().join("pho/surface_term1_pho.csv").exists());
}

#[test]
fn evaluate_perfect_predictions_gives_r2_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), sim_cfg(tmp.path()));
    let dir = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();
    cmd()
        .args(["--config", &cfg, "--out-dir", &dir("sim"), "simulate"])
        .assert()
        .success();
    cmd()
        .args([
            "--config",
            &cfg,
            "--out-dir",
            &dir("eval"),
            "evaluate",
            "--predictions",
            tmp.path().join("sim/y.csv").to_str().unwrap(),
        ])
        .assert()
        .success();
    let eval: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("eval/eval.json")).unwrap())
            .unwrap();
    assert!((eval["functional_r2"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn checkpoint_reproducibility_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), sim_cfg(tmp.path()));
    let dir = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();
    cmd()
        .args(["--config", &cfg, "--out-dir", &dir("sim"), "simulate"])
        .assert()
        .success();
    for name in ["fit_a", "fit_b"] {
        cmd()
            .args(["--config", &cfg, "--seed", "9", "--out-dir", &dir(name), "fit"])
            .assert()
            .success();
    }
    let a = std::fs::read(tmp.path().join("fit_a/model.json")).unwrap();
    let b = std::fs::read(tmp.path().join("fit_b/model.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn global_seed_overrides_config_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), sim_cfg(tmp.path()));
    let dir = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();
    cmd()
        .args(["--config", &cfg, "--seed", "4", "--out-dir", &dir("a"), "simulate"])
        .assert()
        .success();
    cmd()
        .args(["--config", &cfg, "--seed", "5", "--out-dir", &dir("b"), "simulate"])
        .assert()
        .success();
    let a = std::fs::read(tmp.path().join("a/y.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b/y.csv")).unwrap();
    assert_ne!(a, b);
}
