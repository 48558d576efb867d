//! End-to-end runs of the `gazeprint` binary on a small synthetic fixture.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gazeprint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gazeprint"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = gazeprint(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_configs(dir: &Path) {
    fs::write(
        dir.join("synth.json"),
        r#"{"reader_count":2,"sentences_train":24,"sentences_test":12,"divergence":1.0,"seed":5,"output_dir":"data"}"#,
    )
    .unwrap();
    fs::write(
        dir.join("run.json"),
        r#"{"corpus":"data/train.jsonl","test_corpus":"data/test.jsonl","models_dir":"models","output_dir":"out",
            "iterations":600,"burn_in":300,"quadrature_count":128,"seed":11,
            "eval":{"repeats":3,"test_fractions":[0.5,1.0],"reader_counts":[1,2]}}"#,
    )
    .unwrap();
}

#[test]
fn smoke_fixture_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_configs(dir);
    let synth = dir.join("synth.json");
    let run = dir.join("run.json");
    ok(&["synth", "--config", synth.to_str().unwrap()]);
    for f in ["train.jsonl", "test.jsonl", "manifest.json", "truth/r000.json", "truth/r001.json"] {
        assert!(dir.join("data").join(f).exists(), "{f}");
    }

    ok(&["train", "--config", run.to_str().unwrap()]);
    assert!(dir.join("models/r000.json").exists());
    assert!(dir.join("out/train_log.json").exists());

    let out = ok(&["identify", "--config", run.to_str().unwrap()]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "2/2 units identified");
    let preds: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("out/predictions.json")).unwrap()).unwrap();
    for p in preds.as_array().unwrap() {
        assert_eq!(p["predicted"], p["truth"]);
    }

    ok(&["eval", "--config", run.to_str().unwrap()]);
    let first = fs::read(dir.join("out/metrics.json")).unwrap();
    let curve = fs::read(dir.join("out/curve.csv")).unwrap();
    ok(&["eval", "--config", run.to_str().unwrap()]);
    assert_eq!(fs::read(dir.join("out/metrics.json")).unwrap(), first);
    assert_eq!(fs::read(dir.join("out/curve.csv")).unwrap(), curve);
    let metrics: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(metrics["accuracy"], 1.0);
    assert_eq!(metrics["accuracy_by_reader_count"].as_array().unwrap().len(), 2);

    let model = dir.join("models/r000.json");
    let csv = ok(&["export-density", "--model", model.to_str().unwrap(), "--role", "alpha2"]).stdout;
    let csv = String::from_utf8(csv).unwrap();
    assert!(csv.starts_with("x,log_pdf\n"));
    assert!(csv.lines().count() > 128);
    let bad = gazeprint(&["export-density", "--model", model.to_str().unwrap(), "--role", "alpha9"]);
    assert!(!bad.status.success());

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("out/manifest_train.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["config"].get("jobs").is_none());
}

#[test]
fn baseline_mode_from_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_configs(dir);
    ok(&["synth", "--config", dir.join("synth.json").to_str().unwrap()]);
    ok(&["train", "--config", dir.join("run.json").to_str().unwrap(), "--mode", "gamma-baseline"]);
    let log: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("out/train_log.json")).unwrap()).unwrap();
    assert_eq!(log["mode"], "gamma-baseline");
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("models/r001.json")).unwrap()).unwrap();
    for (_, d) in model["densities"].as_object().unwrap() {
        assert!(d["g"].as_array().unwrap().iter().all(|g| g.as_f64() == Some(0.0)));
    }
}

#[test]
fn missing_corpus_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run.json");
    fs::write(&run, r#"{"corpus":"nowhere/train.jsonl","models_dir":"m","output_dir":"o"}"#).unwrap();
    let out = gazeprint(&["train", "--config", run.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nowhere/train.jsonl"), "{err}");
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn config_errors_list_every_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run.json");
    fs::write(
        &run,
        r#"{"corpus":"c","models_dir":"m","output_dir":"o","lambda":-1,"thinning":0,"burn_in":20000}"#,
    )
    .unwrap();
    let out = gazeprint(&["eval", "--config", run.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["lambda", "thinning", "burn_in"] {
        assert!(err.contains(needle), "{err}");
    }

    fs::write(&run, r#"{"corpus":"c","models_dir":"m","output_dir":"o","iteratons":5,"sed":1}"#).unwrap();
    let err = String::from_utf8_lossy(&gazeprint(&["eval", "--config", run.to_str().unwrap()]).stderr).to_string();
    assert!(err.contains("iteratons") && err.contains("sed"), "{err}");
}
