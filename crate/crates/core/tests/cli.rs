use std::fs;
use std::process::Command;

use oldroyd::io::{read_diagnostics, read_snapshot};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oldroyd"))
}

#[test]
fn list_prints_every_preset() {
    let out = bin().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text.lines().filter_map(|l| l.split_whitespace().next()).collect();
    assert_eq!(
        names,
        [
            "uniform_damping",
            "advection_periodic",
            "vortex_domination",
            "driven_noslip",
            "reduction_twin",
            "negative_pressure_sign"
        ]
    );
}

#[test]
fn verify_passing_preset_exits_zero() {
    let out = bin().args(["verify", "uniform_damping"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("uniform_damping: PASS"));
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let out = bin().args(["verify", "no_such_thing"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().arg("run").arg(dir.path().join("absent.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "scenario = uniform_damping\n[model]\ngamma = 3\n").unwrap();
    let out = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn run_writes_snapshots_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "scenario = uniform_damping\n\n[grid]\nn = 8\n\n[scenario]\nt_end = 0.01\ndt = 0.001\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .args(["--snapshot-every", "5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let history = read_diagnostics(&out_dir.join("diagnostics.csv")).unwrap();
    assert_eq!(history.len(), 11);
    let last = read_snapshot(&out_dir.join("final.txt")).unwrap();
    assert_eq!((last.nx, last.ny), (8, 8));
    assert!((last.time - 0.01).abs() < 1e-15);
    // tau decays as exp(-t / (2 lambda)) from its initial value.
    let first = read_snapshot(&out_dir.join("snapshot_000000.txt")).unwrap();
    let mid = read_snapshot(&out_dir.join("snapshot_000005.txt")).unwrap();
    assert!(mid.field("tau").unwrap().max() < first.field("tau").unwrap().max());
    assert!(out_dir.join("snapshot_000010.txt").exists());
}
