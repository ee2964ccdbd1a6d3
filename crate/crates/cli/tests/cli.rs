use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn sample() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/sample_food.json")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_taxometer"))
        .args(args)
        .env_remove("TAXOMETER_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn tsv_and_json_fixtures_agree() {
    let dir = fixtures();
    let v = json(&[
        "score",
        "--predicted",
        s(&dir.join("animals.tsv")),
        "--glosses",
        s(&dir.join("animals_glosses.tsv")),
        "--gold",
        s(&dir.join("animals.json")),
    ]);
    assert_eq!(v["f1"], 1.0);
    assert_eq!(v["fn"], 0);
}

#[test]
fn reference_free_metrics_on_the_sample() {
    let food = sample();
    let csc = json(&["score", "--metric", "csc", "--taxonomy", s(&food)]);
    assert_eq!(csc["n"], 50 * 49 / 2);
    assert!(csc["tau"].as_f64().unwrap() > 0.0);
    let sp = json(&["score", "--metric", "sp", "--taxonomy", s(&food)]);
    assert!(sp["groups"].as_u64().unwrap() > 0);
    let strong = json(&["score", "--metric", "nliv-s", "--taxonomy", s(&food)]);
    let weak = json(&["score", "--metric", "nliv-w", "--taxonomy", s(&food)]);
    assert!(weak["score"].as_f64().unwrap() >= strong["score"].as_f64().unwrap());
}

#[test]
fn degrade_writes_trace_and_checkpoints() {
    let out = tempfile::tempdir().unwrap();
    let v = json(&[
        "degrade",
        "--taxonomy",
        s(&sample()),
        "--kind",
        "leaf",
        "--seed",
        "3",
        "--schedule",
        "1,4,9",
        "--out",
        s(out.path()),
        "--materialize",
    ]);
    assert_eq!(v["checkpoints"], serde_json::json!([1, 4, 9]));
    let trace = std::fs::read_to_string(out.path().join("trace_leaf_3.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 9);
    assert!(out.path().join("taxonomy_leaf_3_9.json").exists());
}

#[test]
fn study_run_correlate_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("study.toml");
    std::fs::write(
        &config,
        format!(
            "records = \"records.csv\"\nschedule = [1, 4, 16]\n\n[[datasets]]\nid = \"food\"\npath = \"{}\"\ndegradations = 3\n",
            s(&sample()).replace('\\', "/")
        ),
    )
    .unwrap();
    let v = json(&["study", "run", "--config", s(&config)]);
    assert_eq!(v["written"], 9);
    let again = json(&["study", "run", "--config", s(&config)]);
    assert_eq!(again["written"], 0);

    let records = dir.path().join("records.csv");
    let report = json(&["study", "correlate", "--records", s(&records)]);
    assert_eq!(report["groups"][0]["dataset"], "food");

    let plot = dir.path().join("plot.csv");
    let out = run(&["study", "export-plot", "--records", s(&records), "--out", s(&plot)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(plot).unwrap();
    assert!(text.starts_with("metric,mutations,normalized_score"));
}

#[test]
fn bad_arguments_fail_cleanly() {
    let out = run(&["score", "--metric", "csc", "--taxonomy", "/nonexistent.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonexistent"));
}
