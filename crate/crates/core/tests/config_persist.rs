use fuchswave::solver::persist::MANIFEST;
use fuchswave::solver::{persist, run, ExperimentConfig, ExperimentKind, RunOptions};
use std::path::Path;

fn parse(text: &str) -> fuchswave::Result<ExperimentConfig> {
    ExperimentConfig::from_json(text, Path::new("."))
}

#[test]
fn rejects_bad_configs() {
    let cases = [
        (r#"{ "schema": 1, "colour": 3 }"#, "unknown field"),
        (r#"{ "schema": 2 }"#, "schema"),
        (r#"{ "schema": 1, "grid": { "dim": 2, "points_per_dim": 100 } }"#, "power of two"),
        (r#"{ "schema": 1, "model": { "family": "pure", "b0": -1.0, "m0": 0.0 } }"#, ""),
        (r#"{ "schema": 1, "times": { "t_final": -5.0 } }"#, ""),
    ];
    for (text, needle) in cases {
        let err = parse(text).expect_err(text).to_string();
        assert!(err.contains(needle), "{text}: {err}");
    }
}

#[test]
fn error_reports_the_line() {
    let err = parse("{\n  \"schema\": 1,\n  \"zone\": { \"N\": \"one\" }\n}").unwrap_err().to_string();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn same_config_gives_identical_hashes() {
    let mut config = ExperimentConfig::new(ExperimentKind::Classify);
    config.apply(&fuchswave::solver::Overrides { b0: Some(2.0), m0: Some(0.75), ..Default::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut manifests = Vec::new();
    for _ in 0..2 {
        let (record, _) = run(&config, ExperimentKind::Classify, &RunOptions::default()).unwrap();
        persist(&record, dir.path()).unwrap();
        let m: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join(MANIFEST)).unwrap()).unwrap();
        manifests.push(m);
    }
    assert_eq!(manifests[0]["config_hash"], manifests[1]["config_hash"]);
    assert_eq!(manifests[0]["content_hash"], manifests[1]["content_hash"]);
    assert_eq!(manifests[0]["config"], manifests[1]["config"]);
}
