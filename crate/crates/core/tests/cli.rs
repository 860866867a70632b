//! The `bmc` binary end to end: exit codes, outputs and determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bmc(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bmc"))
        .args(args)
        .current_dir(cwd)
        .env_remove("BMC_THREADS")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn check_with_defaults_passes_every_identity() {
    let dir = tempfile::tempdir().unwrap();
    let out = bmc(dir.path(), &["check", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("o/check.json"));
    assert_eq!(report["passed"], true);
    let verdicts = report["verdicts"].as_array().unwrap();
    for name in [
        "row_sums",
        "reduction_idempotent",
        "one_step_commutation",
        "one_step_martingale",
        "kappa_stationarity",
        "kappa_isotropic_closed_form",
        "green_symmetry",
        "shift_identity",
        "deterministic_replay",
    ] {
        let v = verdicts.iter().find(|v| v["name"] == name).unwrap_or_else(|| panic!("{name} missing"));
        assert_eq!(v["passed"], true, "{name}");
    }
}

#[test]
fn missing_offspring_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"state_space": {"type": "tree", "degree": 3}, "branching": {"mode": "independent"}}"#).unwrap();
    let out = bmc(dir.path(), &["martingale", "--config", cfg.to_str().unwrap(), "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("branching.offspring"), "{msg}");
}

#[test]
fn invalid_values_name_their_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"state_space": {"type": "singleton"}, "branching": {"offspring": {"kind": "geometric", "q": 1.5}}}"#,
    )
    .unwrap();
    let out = bmc(dir.path(), &["gw", "--config", cfg.to_str().unwrap(), "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("branching.offspring"));
    let out = bmc(dir.path(), &["gw", "--format", "xml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gw_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = bmc(dir.path(), &["gw", "--seed", "7", "--out", "a"]);
    let b = bmc(dir.path(), &["gw", "--seed", "7", "--out", "b", "--threads", "1"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(b.status.code(), Some(0));
    let (ja, jb) = (fs::read(dir.path().join("a/gw.json")).unwrap(), fs::read(dir.path().join("b/gw.json")).unwrap());
    assert_eq!(ja, jb);
    let other = bmc(dir.path(), &["gw", "--seed", "8", "--out", "c"]);
    assert_eq!(other.status.code(), Some(0));
    assert_ne!(fs::read(dir.path().join("c/gw.json")).unwrap(), ja);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    fs::write(
        &cfg,
        r#"{"state_space": {"type": "free_group", "rank": 2},
            "branching": {"offspring": {"kind": "explicit", "support": [1, 2, 3], "probs": [0.3, 0.4, 0.3]}},
            "experiment": {"horizon": 5, "trajectories": 20, "watched": ["o", "a"], "snapshot_steps": [3]},
            "seed": 11}"#,
    )
    .unwrap();
    let first = bmc(dir.path(), &["simulate", "--config", cfg.to_str().unwrap(), "--out", "first"]);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let report = json(&dir.path().join("first/simulate.json"));
    let echo = dir.path().join("echo.json");
    fs::write(&echo, serde_json::to_string(&report["config"]).unwrap()).unwrap();
    let second = bmc(dir.path(), &["simulate", "--config", echo.to_str().unwrap(), "--out", "second"]);
    assert_eq!(second.status.code(), Some(0), "{}", String::from_utf8_lossy(&second.stderr));
    for f in ["simulate.json", "trajectories.csv", "snapshots/traj4_n3.csv"] {
        assert_eq!(
            fs::read(dir.path().join("first").join(f)).unwrap(),
            fs::read(dir.path().join("second").join(f)).unwrap(),
            "{f}"
        );
    }
    let csv = fs::read_to_string(dir.path().join("first/trajectories.csv")).unwrap();
    assert!(csv.starts_with("run_id,trajectory_id,n,pop_size,w_n,distinct_sites,truncated,M(o),M(a)\n"));
    assert_eq!(csv.lines().count(), 1 + 20 * 6);
    let snap = fs::read_to_string(dir.path().join("first/snapshots/traj4_n3.csv")).unwrap();
    assert!(snap.starts_with("vertex_string,count\n"));
}

#[test]
fn failed_verdicts_exit_three_with_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("green.json");
    fs::write(
        &cfg,
        r#"{"state_space": {"type": "tree", "degree": 3},
            "branching": {"offspring": {"kind": "delta", "k": 2}},
            "experiment": {"n_max": 5, "spectral_tolerance": 1e-9}}"#,
    )
    .unwrap();
    let out = bmc(dir.path(), &["green", "--config", cfg.to_str().unwrap(), "--out", "o", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(3));
    let verdicts = fs::read_to_string(dir.path().join("o/green_verdicts.csv")).unwrap();
    assert!(verdicts.contains("spectral_bracket_width"));
    assert!(dir.path().join("o/green_curves.csv").exists());
    assert!(dir.path().join("o/green_config.json").exists());
}

#[test]
fn runtime_errors_leave_a_marker() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("recurrent.json");
    fs::write(
        &cfg,
        r#"{"state_space": {"type": "explicit", "states": ["u", "v"], "matrix": [[0.5, 0.5], [0.5, 0.5]]},
            "branching": {"offspring": {"kind": "delta", "k": 2}}}"#,
    )
    .unwrap();
    let out = bmc(dir.path(), &["green", "--config", cfg.to_str().unwrap(), "--out", "o"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("o/FAILED").exists());
}

#[test]
fn writes_only_inside_out() {
    let dir = tempfile::tempdir().unwrap();
    let out = bmc(dir.path(), &["boundary-table", "--depth", "3", "--out", "tables", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let entries: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries, vec!["tables"]);
    let table = fs::read_to_string(dir.path().join("tables/kappa_table.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("anchor_word,depth,mass"));
    // 3 + 6 + 12 cylinders.
    assert_eq!(lines.count(), 21);
    assert!(table.contains("\nab,2,0.16666666666"));
}

#[test]
fn sweeps_expand_to_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    fs::write(
        &cfg,
        r#"{"state_space": {"type": "singleton"},
            "branching": {"offspring": {"kind": "geometric", "q": 0.5}},
            "experiment": {"horizon": [6, 8], "trajectories": 500},
            "seed": 5}"#,
    )
    .unwrap();
    let out = bmc(dir.path(), &["martingale", "--config", cfg.to_str().unwrap(), "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r0 = json(&dir.path().join("o/martingale_run0.json"));
    let r1 = json(&dir.path().join("o/martingale_run1.json"));
    assert_eq!(r0["horizon"], 6);
    assert_eq!(r1["horizon"], 8);
    assert_ne!(r0["seed"], r1["seed"]);
}
