use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kgflow::experiments::RunConfig;

fn kgflow(args: &[&str], config: Option<&str>, dir: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kgflow"));
    cmd.args(args).arg("--out").arg(dir.join("out"));
    if let Some(text) = config {
        let path = dir.join("config.json");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap()
}

const SMALL_ORACLE: &str = r#"{"enabled": [9], "oracle": {"dx": 0.02, "times": [2.0, 4.0], "radius": 40.0, "snapshot_stride": 25}}"#;

#[test]
fn same_config_and_seed_give_identical_csv() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [a.path(), b.path()] {
        let out = kgflow(&["oracle", "--seed", "11"], Some(SMALL_ORACLE), dir);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    }
    for name in ["checks.csv", "oracle_comparison.csv", "oracle_snapshots.csv", "oracle_spectral.csv"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
    assert!(read(a.path(), "oracle_snapshots.csv").starts_with("t,branch,x,re,im\n"));
}

#[test]
fn effective_config_is_dumped_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = kgflow(&["oracle", "--seed", "42"], Some(SMALL_ORACLE), dir.path());
    assert!(out.status.success());
    let dumped = RunConfig::from_json(&read(dir.path(), "config.json")).unwrap();
    assert_eq!(dumped.seed, 42);
    assert_eq!(dumped.oracle.radius, 40.0);
    assert_eq!(dumped.decay, RunConfig::default().decay);
}

#[test]
fn plot_data_is_two_column_with_a_script() {
    let dir = tempfile::tempdir().unwrap();
    assert!(kgflow(&["oracle"], Some(SMALL_ORACLE), dir.path()).status.success());
    let plots = dir.path().join("out").join("plots");
    let script = fs::read_to_string(plots.join("plot.py")).unwrap();
    let mut seen = 0;
    for entry in fs::read_dir(&plots).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "dat") {
            seen += 1;
            let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
            assert!(script.contains(&format!("\"{stem}\"")));
            let text = fs::read_to_string(&path).unwrap();
            assert!(text.lines().skip(1).all(|l| l.split_whitespace().count() == 2));
        }
    }
    assert_eq!(seen, 2);
}

#[test]
fn wrong_plancherel_constant_fails_with_the_measured_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"cq": 1.0, "enabled": [1], "transform": {"pairs": 2, "potentials": [[0.0, 1.0]]}}"#;
    let out = kgflow(&["transform-check"], Some(cfg), dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("C1 FAIL") && stdout.contains("3.14159"), "{stdout}");
    assert!(read(dir.path(), "checks.csv").contains(",false,"));
}

#[test]
fn empty_profile_round_trip_is_all_zero_and_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = kgflow(
        &["transform-check"],
        Some(r#"{"profile_shape": "zero", "enabled": [2]}"#),
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let table = read(dir.path(), "round_trip.csv");
    for row in table.lines().skip(1) {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(&cols[7..], ["0e0", "0e0", "0e0"]);
    }
}

#[test]
fn disabled_checks_pass_vacuously() {
    let dir = tempfile::tempdir().unwrap();
    let out = kgflow(&["all"], Some(r#"{"enabled": []}"#), dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read(dir.path(), "checks.csv"), "criterion,title,passed,summary\n");
}

#[test]
fn bad_input_exits_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(kgflow(&["decay"], Some(r#"{"a1": 3.0}"#), dir.path()).status.code(), Some(2));
    assert_eq!(kgflow(&["decay"], Some("{not json"), dir.path()).status.code(), Some(2));
    assert_eq!(kgflow(&["frobnicate"], None, dir.path()).status.code(), Some(2));
}
