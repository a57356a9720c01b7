use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn semilpp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semilpp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn identities_writes_three_outputs_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = semilpp(&["identities", "--count", "20", "--seed", "7", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("identities.csv")).unwrap();
    assert!(csv.starts_with("# semilpp identities\n# seed = 7\n"));
    assert!(csv.contains("identity,checks,violations,worst_relative"));
    let svg = fs::read_to_string(dir.path().join("identities.svg")).unwrap();
    assert!(svg.contains("seed=7"));
    let report = json(&dir.path().join("identities.json"));
    assert_eq!(report["seed"], 7);
    assert_eq!(report["pass"], true);
}

#[test]
fn invalid_arguments_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(semilpp(&["identities", "--count", "0", "--out", out]).status.code(), Some(2));
    assert_eq!(semilpp(&["profile", "--environment", "E2", "--out", out]).status.code(), Some(2));
    assert_eq!(semilpp(&["dimension", "--target", "nope", "--out", out]).status.code(), Some(2));
    assert!(!dir.path().join("identities.json").exists());
}

#[test]
fn failing_criterion_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = semilpp(&["levy", "--replicas", "100", "--dx", "1e-2", "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&dir.path().join("levy.json"))["pass"], false);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"seed": 3, "n": 8, "dx-env": 0.01, "y-b": 0.25, "x-lo": 0.5}"#).unwrap();
    let out = dir.path().to_str().unwrap();
    let o = semilpp(&["profile", "--config", cfg.to_str().unwrap(), "--seed", "5", "--out", out, "--no-timing"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&dir.path().join("profile.json"));
    assert_eq!(report["seed"], 5);
    assert_eq!(report["params"]["n"], 8);
    assert_eq!(report["params"]["y_b"], 0.25);
    assert_eq!(report["runtime_seconds"], 0.0);

    fs::write(&cfg, r#"{"bogus": 1}"#).unwrap();
    let o = semilpp(&["profile", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn e2_ledger_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = semilpp(&["identities", "--fixture", "E2", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("identities.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.ends_with(",1")), "{csv}");
}

#[test]
fn cantor_dimension_runs_alone() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = semilpp(&["dimension", "--target", "cantor", "--cantor-depth", "8", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("dimension.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.starts_with("cantor,")).count(), 8);
}
