use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use opdg::bundled;
use opdg::riccati::solve_coupled_are;
use serde_json::Value;

fn games() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/games")
}

fn opdg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opdg")).args(args).output().expect("binary runs")
}

fn game_path(name: &str) -> String {
    games().join(format!("{name}.json")).to_string_lossy().into_owned()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn ne_prints_full_precision_gains() {
    let out = opdg(&["ne", &game_path("example2")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let json = stdout_json(&out);
    let ne = solve_coupled_are(&bundled::example2()).unwrap();
    for (i, k) in ne.k.iter().enumerate() {
        let row = &json["players"][i]["K"][0];
        for j in 0..3 {
            assert_eq!(row[j].as_f64().unwrap(), k[(0, j)]);
        }
    }
    assert_eq!(json["closed_loop_eigenvalues"].as_array().unwrap().len(), 3);
    assert!(json["residual"].as_f64().unwrap() < 1e-9);
}

#[test]
fn malformed_json_exits_with_input_status_and_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"A\": [[1.0]\n,").unwrap();
    let out = opdg(&["ne", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn invalid_game_and_missing_file_exit_with_input_status() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("game.json");
    std::fs::write(&path, r#"{"A": [[-1.0]], "B": [[[1.0]]], "players": [{"Q": [[1.0]], "R": [[[0.0]]]}], "x0": [1.0]}"#).unwrap();
    let out = opdg(&["ne", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("positive definite"), "{}", stderr(&out));
    let out = opdg(&["ne", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unstabilizable_game_exits_with_numerical_status() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("game.json");
    std::fs::write(&path, r#"{"A": [[1.0]], "B": [[[0.0]]], "players": [{"Q": [[1.0]], "R": [[[1.0]]]}], "x0": [1.0]}"#).unwrap();
    let out = opdg(&["ne", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn infeasible_trajectory_free_run_exits_with_report() {
    let out = opdg(&["identify", &game_path("example2"), "--method", "tfo"]);
    assert_eq!(out.status.code(), Some(4));
    let json = stdout_json(&out);
    assert_eq!(json["feasible"], Value::Bool(false));
    assert!(json["potential"].is_null() && json["e_x"].is_null());
    assert_eq!(json["feasibility"]["condition_b_value"].as_f64(), Some(0.0));
    assert_eq!(json["feasibility"]["advisory"], "likely-infeasible");
}

#[test]
fn noise_free_wtdo_writes_report_and_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let out = opdg(&["identify", &game_path("example2"), "--method", "wtdo", "--snr", "inf", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let json = stdout_json(&out);
    assert_eq!(json["method"], "WTDO");
    assert!(json["e_x"].as_f64().unwrap().is_finite());
    assert_eq!(json["verification"]["pass_rate"].as_f64(), Some(1.0));
    for file in ["report_wtdo.json", "trajectory_ne.csv", "trajectory_wtdo.csv", "gradients_wtdo.csv"] {
        assert!(dir.path().join(file).exists(), "{file}");
    }
}

#[test]
fn noisy_reports_are_deterministic_per_seed() {
    let run = |seed: &str| {
        let out = opdg(&["identify", &game_path("example2"), "--method", "wtdo", "--snr", "20", "--seed", seed]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let json = stdout_json(&out);
        assert_eq!(json["noise"]["snr_db"].as_f64(), Some(20.0));
        (json["potential"].clone(), json["e_x"].clone())
    };
    assert_eq!(run("3"), run("3"));
}

#[test]
fn all_methods_produce_a_comparison_table() {
    let out = opdg(&["identify", &game_path("example1"), "--all"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let table = String::from_utf8(out.stdout).unwrap();
    for m in ["| TFO |", "| WTDO |", "| IDO |"] {
        assert!(table.contains(m), "{table}");
    }
}

#[test]
fn method_or_all_is_required() {
    let out = opdg(&["identify", &game_path("example1")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_prints_the_trajectory() {
    let out = opdg(&["simulate", &game_path("example2"), "--horizon", "0.01", "--step", "0.001"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x1,x2,x3,u1,u2"));
    assert_eq!(lines.count(), 11);
    assert!(csv.lines().nth(1).unwrap().starts_with("0.0000000000000000e0,-1.2000000000000000e0"));
}

#[test]
fn verify_accepts_a_written_potential_and_rejects_a_misshapen_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = opdg(&["identify", &game_path("example2"), "--method", "wtdo", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report_wtdo.json")).unwrap()).unwrap();
    let pot_path = dir.path().join("potential.json");
    std::fs::write(&pot_path, report["potential"].to_string()).unwrap();
    let out = opdg(&["verify", &game_path("example2"), pot_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let json = stdout_json(&out);
    assert_eq!(json["verification"]["pass_rate"].as_f64(), Some(1.0));
    assert_eq!(json["exact_potential"], Value::Bool(false));

    let out = opdg(&["verify", &game_path("example1"), pot_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reproduce_writes_the_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("bundle");
    let out = opdg(&["reproduce", "example1", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for file in [
        "game.json",
        "ne.json",
        "report_tfo.json",
        "report_wtdo.json",
        "report_ido.json",
        "trajectory_ne.csv",
        "trajectory_wtdo.csv",
        "gradients_wtdo.csv",
        "summary.md",
    ] {
        assert!(out_dir.join(file).exists(), "{file}");
    }
    let summary = std::fs::read_to_string(out_dir.join("summary.md")).unwrap();
    assert!(summary.contains("## Equilibrium gains") && summary.contains("## TFO weights"));
    assert!(!out_dir.join("sweep.json").exists());
}

#[test]
fn reproduce_second_example_includes_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = opdg(&["reproduce", "example2", "--seeds", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let sweep: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(sweep.as_array().unwrap().len(), 8);
    let summary = std::fs::read_to_string(dir.path().join("summary.md")).unwrap();
    assert!(summary.contains("## Noise sweep") && summary.contains("WTDO reference"));
}
