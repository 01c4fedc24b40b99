//! End-to-end runs of the `abctherm` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
[grid]
shape = "interval"
length = 1.0
n_cells = 16

[time]
t_final = 0.5
n_steps = 40

[model]
alpha = 0.7

[initial_state]
kind = "cosine"
mean = 1.0
amplitude = 0.5
wavenumber = 1
"#;

fn run(dir: &Path, mode: &str, config: &str, extra: &[&str]) -> Output {
    let path = dir.join("input.toml");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_abctherm"))
        .arg(mode)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap()
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&read(dir, name)).unwrap()
}

#[test]
fn idle_problem_stays_at_initial_state() {
    let dir = TempDir::new().unwrap();
    let config = SMALL.replace(
        "kind = \"cosine\"\nmean = 1.0\namplitude = 0.5\nwavenumber = 1",
        "kind = \"constant\"\nvalue = 2.5",
    );
    let out = run(
        dir.path(),
        "simulate",
        &config,
        &["model.lambda=0", "control.initial=0"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "state_trajectory.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,node,x,u"));
    let mut rows = 0;
    for line in lines {
        assert_eq!(line.rsplit(',').next(), Some("2.5"), "{line}");
        rows += 1;
    }
    assert_eq!(rows, 41 * 17);
    let summary = json(dir.path(), "summary.json");
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["mode"], "simulate");
}

#[test]
fn resolved_config_reproduces_run_byte_for_byte() {
    let first = TempDir::new().unwrap();
    let out = run(first.path(), "optimize", SMALL, &["--seed", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let resolved = read(first.path(), "resolved.toml");

    // Rerun from the resolved file, pointing it at a second directory.
    let second = TempDir::new().unwrap();
    let out = run(second.path(), "optimize", &resolved, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let again = read(second.path(), "resolved.toml");
    let strip = |s: &str| {
        s.lines()
            .filter(|l| !l.starts_with("output_dir"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&resolved), strip(&again));
    for name in [
        "state_trajectory.csv",
        "adjoint_trajectory.csv",
        "control.csv",
        "trace.csv",
    ] {
        assert_eq!(read(first.path(), name), read(second.path(), name), "{name}");
    }
}

#[test]
fn optimize_trace_is_monotone_and_admissible() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "optimize", SMALL, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = read(dir.path(), "trace.csv");
    let costs: Vec<f64> = trace
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(costs.len() > 2);
    assert!(costs.windows(2).all(|w| w[1] <= w[0]), "{costs:?}");
    let control = read(dir.path(), "control.csv");
    assert!(control.starts_with("t,slot,node,x,beta\n"));
    for line in control.lines().skip(1) {
        let b: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((0.1..=2.0).contains(&b));
    }
    let summary = json(dir.path(), "summary.json");
    assert_eq!(summary["optimizer"]["converged"], true);
    assert!(summary["optimizer"]["final_grad_norm"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn sweep_matches_projected_gradient() {
    let pg = TempDir::new().unwrap();
    let fbs = TempDir::new().unwrap();
    assert!(run(pg.path(), "optimize", SMALL, &[]).status.success());
    assert!(run(fbs.path(), "fbs", SMALL, &[]).status.success());
    let a = json(pg.path(), "summary.json")["cost"]["total"].as_f64().unwrap();
    let b = json(fbs.path(), "summary.json")["cost"]["total"].as_f64().unwrap();
    assert!((a - b).abs() <= 1e-3 * a.abs());
}

#[test]
fn verify_reports_every_check() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "verify", SMALL, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(dir.path(), "verify_report.json");
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["all_passed"], true);
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() >= 10);
    for c in checks {
        assert_eq!(c["passed"], true, "{c}");
        assert!(c["measured"].is_number() && c["tolerance"].is_number());
    }
}

#[test]
fn alpha_one_needs_classical_flag() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "simulate", SMALL, &["model.alpha=1"]);
    assert_eq!(out.status.code(), Some(1));
    let err = json(dir.path(), "error.json");
    assert_eq!(err["error"]["kind"], "config");
    assert!(err["error"]["message"].as_str().unwrap().contains("--classical"));

    let out = run(dir.path(), "simulate", SMALL, &["model.alpha=1", "--classical"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(dir.path(), "summary.json")["operator"], "classical");
}

#[test]
fn zero_lower_bound_rejected() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "optimize", SMALL, &["control.lower=0"]);
    assert_eq!(out.status.code(), Some(1));
    let msg = json(dir.path(), "error.json")["error"]["message"]
        .as_str()
        .unwrap()
        .to_string();
    assert!(msg.contains("control.lower"), "{msg}");
}

#[test]
fn unknown_keys_listed_together() {
    let dir = TempDir::new().unwrap();
    let config = format!("{SMALL}\n[solver]\ntolerance = 1e-9\n\n[output]\ndir = \"x\"\n");
    let out = run(dir.path(), "simulate", &config, &[]);
    assert_eq!(out.status.code(), Some(1));
    let msg = json(dir.path(), "error.json")["error"]["message"]
        .as_str()
        .unwrap()
        .to_string();
    assert!(msg.contains("solver.tolerance") && msg.contains("output"), "{msg}");
}

#[test]
fn optimizer_stopped_early_exits_with_three() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "optimize", SMALL, &["optimizer.max_iters=2"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(dir.path(), "summary.json")["optimizer"]["converged"], false);
}
