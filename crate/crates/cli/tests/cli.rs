use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hedge-nash"));
    c.env_remove("HEDGE_NASH_TOL");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write_game(dir: &Path, name: &str, rows: &str) -> String {
    let n = rows.matches('[').count() - 1;
    let path = dir.join(name);
    std::fs::write(&path, format!("{{\"n\": {n}, \"payoff\": {rows}}}")).unwrap();
    path.to_string_lossy().into_owned()
}

fn rps(dir: &Path) -> String {
    write_game(dir, "rps.json", "[[1,0,2],[2,1,0],[0,2,1]]")
}

#[test]
fn verify_exit_codes() {
    let dir = TempDir::new().unwrap();
    let g = rps(dir.path());
    let out = run(&["verify", "--game", &g, "--strategy", "0.3333333333333333,0.3333333333333333,0.3333333333333334", "--tol", "1e-8"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["passed"], true);

    let out = run(&["verify", "--game", &g, "--strategy", "1,0,0"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["gap"], 0.5);
    assert_eq!(v["game_units_gap"], 1.0);

    let out = run(&["verify", "--game", &g, "--strategy", "0.5,0.4,0.0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_support_certificate() {
    let dir = TempDir::new().unwrap();
    let g = write_game(dir.path(), "id.json", "[[1,0],[0,1]]");
    let out = run(&["verify", "--game", &g, "--support", "0,1"]);
    assert_eq!(out.status.code(), Some(0));
    let x = json(&out)["certificate"]["strategy"].clone();
    assert!((x[0].as_f64().unwrap() - 0.5).abs() < 1e-9);
    let out = run(&["verify", "--game", &rps(dir.path()), "--support", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_trace_and_summary() {
    let dir = TempDir::new().unwrap();
    let g = rps(dir.path());
    let trace = dir.path().join("t.csv");
    let out = run(&["run", "--game", &g, "--steps", "200", "--emit-every", "50", "--out", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&out);
    assert!(summary["final_gap_avg"].as_f64().unwrap() <= 1e-12);
    assert_eq!(summary["schedule_validity"]["status"], "valid");
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "K,alpha,A_K,gap_avg,gap_iter,avg_step_norm,X_1,X_2,X_3,Xbar_1,Xbar_2,Xbar_3");
    let ks: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ks, ["0", "50", "100", "150", "200"]);
    for line in text.lines().skip(1) {
        let gap: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(gap <= 1e-12, "{line}");
    }
    assert!(dir.path().join("t.csv.summary.json").exists());
}

#[test]
fn csv_traces_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let paths = [dir.path().join("a.csv"), dir.path().join("b.csv")];
    for p in &paths {
        let out = run(&[
            "run", "--game", "gen:random_uniform:4:3", "--x0", "random", "--seed", "9", "--steps", "5000",
            "--emit-every", "10", "--out", p.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());
}

#[test]
fn invalid_schedule_needs_force() {
    let dir = TempDir::new().unwrap();
    let g = rps(dir.path());
    let trace = dir.path().join("t.csv");
    let t = trace.to_str().unwrap();
    let out = run(&["run", "--game", &g, "--schedule", "power:0.4", "--steps", "10", "--out", t]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid schedule"));
    let out = run(&["run", "--game", &g, "--schedule", "power:0.4", "--steps", "10", "--out", t, "--force"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["outside_hypotheses"], true);
}

#[test]
fn run_then_extract() {
    let dir = TempDir::new().unwrap();
    let g = write_game(dir.path(), "hd.json", "[[0,3],[1,2]]");
    let trace = dir.path().join("hd.jsonl");
    let t = trace.to_str().unwrap();
    let out = run(&["run", "--game", &g, "--steps", "100000", "--emit-every", "10000", "--format", "jsonl", "--out", t]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["final_gap_avg"].as_f64().unwrap() <= 0.05);
    let out = run(&["extract", "--game", &g, "--trace", t, "--criteria", "average_mass"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&out);
    assert_eq!(v["uniform_start"], true);
    assert_eq!(v["certificate"]["method"]["prefix"], 2);
    let x = &v["certificate"]["strategy"];
    assert!((x[0].as_f64().unwrap() - 0.5).abs() < 1e-9);

    let out = run(&["extract", "--game", &g, "--trace", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_list_runs_in_parallel() {
    let dir = TempDir::new().unwrap();
    let configs: Vec<Value> = (0..4)
        .map(|s| {
            serde_json::json!({
                "game": format!("gen:doubly_symmetric:3:{s}"),
                "steps": 2000,
                "emit_every": 500,
                "x0": "random",
                "seed": s,
                "out": dir.path().join(format!("run{s}.csv")),
            })
        })
        .collect();
    let cfg = dir.path().join("runs.json");
    std::fs::write(&cfg, serde_json::to_string(&configs).unwrap()).unwrap();
    let out = run(&["run", "--config", cfg.to_str().unwrap(), "--jobs", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out).as_array().unwrap().len(), 4);
    for s in 0..4 {
        assert!(dir.path().join(format!("run{s}.csv")).exists());
    }
}

#[test]
fn oracle_lists_equilibria() {
    let dir = TempDir::new().unwrap();
    let g = write_game(dir.path(), "id.json", "[[1,0],[0,1]]");
    let out = run(&["oracle", "--game", &g]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out).as_array().unwrap().len(), 3);
    let out = run(&["oracle", "--game", "gen:random_uniform:7:1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generate_and_decompose() {
    let out = run(&["generate", "--kind", "coordination", "--n", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["payoff"], serde_json::json!([[1.0, 0.0], [0.0, 1.0]]));

    let dir = TempDir::new().unwrap();
    let g = write_game(dir.path(), "g.json", "[[0,2],[0,0]]");
    let out = run(&["decompose", "--game", &g]);
    let v = json(&out);
    assert_eq!(v["symmetric"], serde_json::json!([[0.0, 1.0], [1.0, 0.0]]));
    assert_eq!(v["antisymmetric"], serde_json::json!([[0.0, 1.0], [-1.0, 0.0]]));

    let out = run(&["generate", "--kind", "bogus", "--n", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn diagnose_reports() {
    let dir = TempDir::new().unwrap();
    let g = write_game(dir.path(), "id.json", "[[1,0],[0,1]]");
    let out = run(&["diagnose", "--game", &g, "--samples", "1000", "--seed", "7", "--trajectory-steps", "500"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["trajectory_identities"]["passed"], true);

    let out = run(&["diagnose", "--game", "gen:random_uniform:5:3", "--samples", "1000", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));

    let out = run(&["diagnose", "--game", &g, "--samples", "0"]);
    let v = json(&out);
    assert_eq!(v["entropy_bounds"]["vacuous"], true);
    assert_eq!(v["passed"], true);
}

#[test]
fn env_tolerance_override() {
    let dir = TempDir::new().unwrap();
    let g = rps(dir.path());
    let out = bin().args(["verify", "--game", &g, "--strategy", "1,0,0"]).env("HEDGE_NASH_TOL", "0.6").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let out = bin().args(["verify", "--game", &g, "--strategy", "1,0,0"]).env("HEDGE_NASH_TOL", "nope").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["run"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--game", "/nonexistent.json", "--strategy", "1,0"]).status.code(), Some(2));
}
