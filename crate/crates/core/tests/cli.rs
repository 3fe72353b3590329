use fuchswave::solver::run_cli;
use std::path::Path;

fn run(args: &[&str]) -> i32 {
    run_cli(std::iter::once("fuchswave").chain(args.iter().copied()))
}

#[test]
fn classify_exits_zero() {
    assert_eq!(run(&["classify", "--b0", "4", "--m0", "0"]), 0);
}

#[test]
fn help_exits_zero_and_bad_flags_exit_one() {
    assert_eq!(run(&["--help"]), 0);
    assert_eq!(run(&["classify", "--no-such-flag"]), 1);
    assert_eq!(run(&["no-such-command"]), 1);
}

#[test]
fn simulate_without_config_is_an_error() {
    assert_eq!(run(&["simulate"]), 1);
    assert_eq!(run(&["scatter"]), 1);
}

#[test]
fn malformed_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ \"schema\": 1, \"experiment\": ").unwrap();
    assert_eq!(run(&["classify", "--config", bad.to_str().unwrap()]), 1);
    let wrong = dir.path().join("wrong.json");
    std::fs::write(&wrong, r#"{ "schema": 1, "experiment": "moments" }"#).unwrap();
    assert_eq!(run(&["levinson", "--config", wrong.to_str().unwrap()]), 1);
}

#[test]
fn failing_verdict_exits_two() {
    // a one-decade tolerance window on a complex pair misses the predicted rate
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.json");
    std::fs::write(
        &cfg,
        r#"{ "schema": 1, "experiment": "table_sweep", "zone": { "N": 1.0 },
             "sweep": { "cells": [ { "b0": 1.0, "m0": 0.01 } ], "xi_low": 1e-3 },
             "tolerances": { "exponent": 1e-4 } }"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
    assert!(out.join("manifest.json").exists());
    assert!(out.join("tight_results.csv").exists());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        fuchswave::solver::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
