use std::path::PathBuf;
use std::process::{Command, Output};

use aggsim_core::report::CSV_HEADER;

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn aggsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aggsim")).args(args).output().expect("binary runs")
}

fn config(name: &str) -> String {
    scenarios().join(name).display().to_string()
}

#[test]
fn compare_emits_three_policies() {
    let cfg = config("unsaturated-mixed.cfg");
    let out = aggsim(&["run", "--config", &cfg, "--compare", "--duration-ms", "300"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 13);
    let policies: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(&policies[..], &["bi"; 4].iter().chain(&["fifo"; 4]).chain(&["ampdu-greedy"; 4]).copied().collect::<Vec<_>>()[..]);
    for line in &lines[1..] {
        let goodput = line.split(',').nth(4).unwrap();
        assert_eq!(goodput.split('.').nth(1).map(str::len), Some(3), "{line}");
    }
}

#[test]
fn same_seed_same_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("unsaturated-mixed.cfg");
    let paths: Vec<String> = (0..2).map(|i| dir.path().join(format!("r{i}.csv")).display().to_string()).collect();
    for p in &paths {
        let out = aggsim(&["run", "--config", &cfg, "--seed", "7", "--duration-ms", "200", "--out", p]);
        assert!(out.status.success());
    }
    let a = std::fs::read(&paths[0]).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, std::fs::read(&paths[1]).unwrap());
    assert!(String::from_utf8(a).unwrap().lines().nth(1).unwrap().starts_with("bi,7,voice,"));
}

#[test]
fn missing_config_exits_one() {
    let out = aggsim(&["run", "--config", "does-not-exist.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does-not-exist.cfg"));
    assert!(out.stdout.is_empty());
}

#[test]
fn invalid_values_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, "[phy]\nber = 1.5\n[flow]\nac = voice\nmodel = cbr\nperiod_us = 20000\npayload_bytes = 160\n").unwrap();
    let out = aggsim(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("phy.ber"));

    let out = aggsim(&["run", "--scheduler", "round-robin"]);
    assert_eq!(out.status.code(), Some(1));
    let out = aggsim(&["run", "--sweep", "seed=5..5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn json_embeds_resolved_scenario() {
    let cfg = config("saturated-video.cfg");
    let out = aggsim(&["run", "--config", &cfg, "--format", "json", "--duration-ms", "50", "--scheduler", "fifo"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["scenario"]["duration_us"], 50_000);
    assert_eq!(doc["scenario"]["scheduler"]["policy"], "fifo");
    assert_eq!(doc["scenario"]["phy"]["data_rate_mbps"], 248.0);
    assert_eq!(doc["runs"][0]["policy"], "fifo");
    assert!(doc["runs"][0]["rng"].as_str().unwrap().contains("ChaCha8"));
}

#[test]
fn sweep_aggregates_seeds() {
    let out = aggsim(&["run", "--sweep", "seed=1..=3", "--compare", "--duration-ms", "100"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("policy,seeds,ac,delivered_mean,delivered_std"));
    assert_eq!(lines.len(), 1 + 12);
    assert!(lines[1].starts_with("bi,3,voice,"));
}
