use std::path::PathBuf;
use std::process::{Command, Output};

use cpdnes_core::harness::to_csv;
use cpdnes_core::{run_experiment, ExperimentConfig};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn cpdnes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpdnes")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn ne_prints_the_equilibrium() {
    let text = stdout(&cpdnes(&["ne", "--config", config("energy-ring.json").to_str().unwrap()]));
    assert!(text.contains("45.8749"), "{text}");
    assert!(text.contains("49.7773"), "{text}");
}

#[test]
fn check_schedule_reports_pass() {
    let text = stdout(&cpdnes(&["check-schedule", "--config", config("c2.json").to_str().unwrap()]));
    assert!(text.contains("pass (rate exponent 0.6)"), "{text}");
}

#[test]
fn privacy_prints_closed_form_budget() {
    let text = stdout(&cpdnes(&["privacy", "--config", config("c1.json").to_str().unwrap(), "--iters", "100"]));
    assert!(text.contains("δ_k = min{1, 0.48 ln(k+1)}"), "{text}");
}

#[test]
fn compare_output_is_the_library_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp.csv");
    let path = config("energy-ring.json");
    let text = stdout(&cpdnes(&[
        "compare",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--trials",
        "3",
        "--iters",
        "150",
        "--parallelism",
        "2",
    ]));
    assert!(text.contains("C2"), "{text}");
    let cfg = ExperimentConfig::from_path(&path)
        .unwrap()
        .with_overrides(None, Some(3), Some(150))
        .unwrap();
    let expected = to_csv(&run_experiment(&cfg, None).unwrap().series);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), expected);
}

#[test]
fn run_writes_one_variant_and_plot_renders_it() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c3.csv");
    let svg = dir.path().join("c3.svg");
    stdout(&cpdnes(&[
        "run",
        "--config",
        config("energy-ring.json").to_str().unwrap(),
        "--variant",
        "C3",
        "--out",
        csv.to_str().unwrap(),
        "--trials",
        "2",
        "--iters",
        "40",
        "--seed",
        "9",
    ]));
    let body = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(body.lines().count(), 42);
    assert!(body.lines().skip(1).all(|l| l.split(',').nth(1) == Some("C3")));

    stdout(&cpdnes(&[
        "plot",
        "--csv",
        csv.to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
        "--metric",
        "rmse-norm",
        "--x",
        "bits",
    ]));
    let image = std::fs::read_to_string(&svg).unwrap();
    assert!(image.starts_with("<svg") && image.contains("C3"));
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(config("c1.json")).unwrap().replace("\"theta\": 10", "\"theta\": -10");
    std::fs::write(&bad, text).unwrap();
    let out = cpdnes(&["run", "--config", bad.to_str().unwrap(), "--out", dir.path().join("x.csv").to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("theta"), "{err}");
}

#[test]
fn zero_parallelism_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpdnes(&[
        "compare",
        "--config",
        config("c1.json").to_str().unwrap(),
        "--out",
        dir.path().join("x.csv").to_str().unwrap(),
        "--parallelism",
        "0",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("parallelism"));
}
