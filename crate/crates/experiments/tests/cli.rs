use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lowrank::solvers::Algorithm;
use lowrank_experiments::config::{AlgorithmEntry, InstanceConfig, RadiusParams, ScenarioConfig};

fn lowrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowrank")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, cfg: &ScenarioConfig) -> String {
    let path = dir.join("cfg.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn radius_on_valid_config_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig {
        instance: Some(InstanceConfig::completion(8, 1, 0.7)),
        radius: RadiusParams { mu_points: 6, grid: 6, anchor: 3, dense_checks: 2, tolerance: 1e-4 },
        ..ScenarioConfig::default()
    };
    let config = write_config(dir.path(), &cfg);
    let out = dir.path().join("out");
    let res = lowrank(&["radius", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    for name in ["radius_h.csv", "radius_t.csv", "radius_t_dense.csv", "checks.json", "reports.json"] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("PASS h_sweep_matches_oracle")), "{stdout}");
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"radius": {"grid": "big"}}"#).unwrap();
    let res = lowrank(&["radius", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("radius.grid"));

    fs::write(&path, r#"{"compare": {"rate_tolerance": 0.05, "colour": 1}}"#).unwrap();
    let res = lowrank(&["compare", "--config", path.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("colour"));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let res = lowrank(&["quadratic", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn failed_rate_check_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig {
        algorithms: Some(vec![AlgorithmEntry::new(Algorithm::Iht).with_mu_relative(1.0)]),
        ..ScenarioConfig::default()
    };
    cfg.compare.rate_tolerance = 1e-12;
    cfg.compare.equivalence = false;
    let config = write_config(dir.path(), &cfg);
    let out = dir.path().join("out");
    let res = lowrank(&["compare", "--config", &config, "--seeds", "0,1", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("FAIL rate_IHT")), "{stdout}");
    // Outputs are still written when a check fails.
    assert!(out.join("summary.csv").is_file());
}

#[test]
fn seeds_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = lowrank(&["solve", "--seeds", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let seeds: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(seeds, vec!["3"]);
}

#[test]
fn unknown_subcommand_is_rejected() {
    let res = lowrank(&["tune"]);
    assert_ne!(res.status.code(), Some(0));
}
