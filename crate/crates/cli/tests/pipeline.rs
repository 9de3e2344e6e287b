use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_alldiff-select");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn pipeline(dir: &Path, jobs: &str) {
    for (family, size, count, seed) in [
        ("pigeon-hole", "4", "1", "0"),
        ("pigeon-hole", "5", "1", "0"),
        ("random-binary-diseq", "20", "6", "1"),
        ("latin-square", "4", "2", "3"),
    ] {
        ok(
            dir,
            &[
                "generate", "--family", family, "--size", size, "--count", count, "--seed", seed, "--out", "corpus",
            ],
        );
    }
    let det = ["--cost-mode", "deterministic", "--jobs", jobs];
    let with = |rest: &[&'static str]| -> Vec<&str> { det.iter().chain(rest).copied().collect() };
    ok(dir, &with(&["extract", "--corpus", "corpus", "--out", "features.json"]));
    ok(
        dir,
        &with(&[
            "bench",
            "--corpus",
            "corpus",
            "--time-limit",
            "5",
            "--out",
            "matrix.json",
        ]),
    );
    ok(
        dir,
        &with(&["label", "--matrix", "matrix.json", "--out", "labels.json"]),
    );
    ok(
        dir,
        &with(&[
            "train",
            "--features",
            "features.json",
            "--labels",
            "labels.json",
            "--out",
            "model.json",
        ]),
    );
    ok(
        dir,
        &with(&[
            "evaluate",
            "--model",
            "model.json",
            "--features",
            "features.json",
            "--matrix",
            "matrix.json",
            "--out",
            "report.txt",
            "--instances-out",
            "instances.csv",
        ]),
    );
}

const OUTPUTS: [&str; 6] = [
    "features.json",
    "matrix.json",
    "labels.json",
    "model.json",
    "report.txt",
    "instances.csv",
];

#[test]
fn deterministic_pipeline_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path(), "1");
    pipeline(b.path(), "4");
    for f in OUTPUTS {
        let x = fs::read(a.path().join(f)).unwrap();
        let y = fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
    // Re-running into the same directory overwrites with identical bytes.
    let before: Vec<Vec<u8>> = OUTPUTS.iter().map(|f| fs::read(a.path().join(f)).unwrap()).collect();
    pipeline(a.path(), "2");
    for (f, old) in OUTPUTS.iter().zip(before) {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), old, "{f}");
    }
    let report = fs::read_to_string(a.path().join("report.txt")).unwrap();
    assert!(report.starts_with("# format-version 1\n"));
    assert!(report.contains("\"sampling_seed\":0"));
    for row in [
        "meta-classifier",
        "oracle",
        "anti-oracle",
        "default decision",
        "random decision",
    ] {
        assert!(report.contains(row), "missing row {row}");
    }
}

#[test]
fn oracle_flag_reports_zero() {
    let d = tempfile::tempdir().unwrap();
    pipeline(d.path(), "2");
    let out = ok(
        d.path(),
        &[
            "evaluate",
            "--oracle",
            "--features",
            "features.json",
            "--matrix",
            "matrix.json",
        ],
    );
    let row = out.lines().find(|l| l.starts_with("oracle selector")).unwrap();
    let total: f64 = row.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert_eq!(total, 0.0);
}

fn snapshot() -> Value {
    json!({
        "time_limit": 100.0, "runs_per_cell": 1, "cost_mode": "deterministic",
        "op_cost_seconds": 1e-6, "feature_set": "full", "sampling_seed": 0,
        "fold_seed": 0, "random_seed": 0, "folds": 3, "duplicate": true
    })
}

const VARIANTS: [&str; 9] = [
    "naive",
    "gac-scratch-full-any",
    "gac-scratch-full-asg",
    "gac-scratch-comp-any",
    "gac-scratch-comp-asg",
    "gac-incr-full-any",
    "gac-incr-full-asg",
    "gac-incr-comp-any",
    "gac-incr-comp-asg",
];

fn matrix_file(times: &[f64; 9]) -> Value {
    let cells: Vec<Value> = VARIANTS
        .iter()
        .zip(times)
        .map(|(v, t)| {
            json!({"instance": "i", "variant": v, "status": "sat", "cpu_time": t, "nodes": 10, "op_count": 10})
        })
        .collect();
    json!({
        "format_version": 1,
        "kind": "matrix",
        "config": snapshot(),
        "data": {
            "protocol": {
                "runs_per_cell": 1,
                "limits": {"time_limit": 100.0, "node_limit": null, "cost_mode": "deterministic"},
                "op_cost_seconds": 1e-6
            },
            "cells": cells
        }
    })
}

#[test]
fn label_picks_uniquely_fastest_naive() {
    let d = tempfile::tempdir().unwrap();
    let mut times = [2.0; 9];
    times[0] = 1.0;
    fs::write(d.path().join("m.json"), matrix_file(&times).to_string()).unwrap();
    ok(d.path(), &["label", "--matrix", "m.json", "--out", "l.json"]);
    let labels: Value = serde_json::from_str(&fs::read_to_string(d.path().join("l.json")).unwrap()).unwrap();
    assert_eq!(labels["format_version"], 1);
    assert_eq!(labels["data"][0]["instance"], "i");
    assert_eq!(labels["data"][0]["label"], "naive");
    assert_eq!(labels["data"][0]["cost"], 1.0);
}

#[test]
fn format_version_mismatch_is_an_input_error() {
    let d = tempfile::tempdir().unwrap();
    let mut m = matrix_file(&[1.0; 9]);
    m["format_version"] = json!(99);
    fs::write(d.path().join("m.json"), m.to_string()).unwrap();
    let out = run(d.path(), &["label", "--matrix", "m.json", "--out", "l.json"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("format version 99"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(d.path(), &["label", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(d.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        run(d.path(), &["label", "--matrix", "missing.json", "--out", "x.json"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(run(d.path(), &["label"]).status.code(), Some(3));
    let mut m = matrix_file(&[1.0; 9]);
    m["kind"] = json!("labels");
    fs::write(d.path().join("m.json"), m.to_string()).unwrap();
    assert_eq!(
        run(d.path(), &["label", "--matrix", "m.json", "--out", "l.json"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        run(
            d.path(),
            &["generate", "--family", "pigeon-hole", "--size", "0", "--out", "c"]
        )
        .status
        .code(),
        Some(3)
    );
}

#[test]
fn config_file_with_flag_override() {
    let d = tempfile::tempdir().unwrap();
    ok(
        d.path(),
        &["generate", "--family", "pigeon-hole", "--size", "3", "--out", "corpus"],
    );
    fs::write(
        d.path().join("cfg.toml"),
        "corpus = \"corpus\"\nfeatures = \"f.json\"\ncost_mode = \"deterministic\"\nsampling_seed = 5\nfeature_set = \"cheap\"\n",
    )
    .unwrap();
    ok(d.path(), &["--config", "cfg.toml", "extract", "--seed", "9"]);
    let f: Value = serde_json::from_str(&fs::read_to_string(d.path().join("f.json")).unwrap()).unwrap();
    assert_eq!(f["config"]["sampling_seed"], 9);
    assert_eq!(f["config"]["feature_set"], "cheap");
    assert_eq!(f["data"][0]["features"]["seed"], 9);
    assert_eq!(f["data"][0]["features"]["values"].as_object().unwrap().len(), 29);
    assert_eq!(f["data"][0]["extraction_seconds"], 0.0);

    fs::write(d.path().join("bad.toml"), "no_such_key = 1\n").unwrap();
    assert_eq!(
        run(d.path(), &["--config", "bad.toml", "extract"]).status.code(),
        Some(3)
    );
}

#[test]
fn generated_files_parse_back() {
    let d = tempfile::tempdir().unwrap();
    ok(
        d.path(),
        &[
            "generate",
            "--family",
            "random-table",
            "--size",
            "6",
            "--count",
            "2",
            "--seed",
            "4",
            "--out",
            "c",
        ],
    );
    let text = fs::read_to_string(d.path().join("c/random-table-6-s4.csp")).unwrap();
    assert!(text.starts_with("# format-version 1\n"));
    let inst = alldiff_select::csp::parse_instance(&text).unwrap();
    assert_eq!(inst.name(), "random-table-6-s4");
}
