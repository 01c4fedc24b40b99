//! Mode dispatch and output files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use abc_thermistor::mesh::{BoundaryControl, SpaceGrid};
use abc_thermistor::optimize::{evaluate_cost, forward_backward_sweep, minimize, OptimizationReport};
use abc_thermistor::state::{solve_state, StateTrajectory, ThermistorProblem};
use abc_thermistor::verify::run_suite;
use abc_thermistor::{Error, Result};
use serde_json::{json, Value};

use crate::config::{emit_config, Mode, RunConfig};

/// Version of the layout of `summary.json` and `error.json`.
pub const SCHEMA_VERSION: u32 = 1;

/// How a completed run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// The run finished but a verification check failed or the optimizer
    /// stopped before its tolerance.
    Unmet,
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("cannot write {}: {e}", path.display()))
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| io_error(&path, e))?;
    Ok((path, BufWriter::new(file)))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| io_error(&path, e))
}

fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::Config(format!("cannot serialize {name}: {e}")))?;
    text.push('\n');
    write_text(dir, name, &text)
}

fn coord_header(grid: &SpaceGrid) -> &'static str {
    if grid.dims() == 2 {
        "x,y"
    } else {
        "x"
    }
}

fn coord_cells(grid: &SpaceGrid, node: usize) -> String {
    let c = grid.coords()[node];
    if grid.dims() == 2 {
        format!("{},{}", c[0], c[1])
    } else {
        format!("{}", c[0])
    }
}

/// One row per (time node, grid node): `t,node,x[,y],<value>`.
fn write_trajectory(
    dir: &Path,
    name: &str,
    value: &str,
    grid: &SpaceGrid,
    times: &[f64],
    rows: &[Vec<f64>],
) -> Result<()> {
    let (path, mut w) = create(dir, name)?;
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "t,node,{},{value}", coord_header(grid))?;
        for (t, slice) in times.iter().zip(rows) {
            for (node, u) in slice.iter().enumerate() {
                writeln!(w, "{t},{node},{},{u}", coord_cells(grid, node))?;
            }
        }
        w.flush()
    };
    body().map_err(|e| io_error(&path, e))
}

/// One row per (time node, boundary slot): `t,slot,node,x[,y],beta`.
fn write_control(dir: &Path, grid: &SpaceGrid, times: &[f64], beta: &BoundaryControl) -> Result<()> {
    let (path, mut w) = create(dir, "control.csv")?;
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "t,slot,node,{},beta", coord_header(grid))?;
        for (t, slice) in times.iter().zip(beta.values()) {
            for (slot, (b, bn)) in slice.iter().zip(grid.boundary()).enumerate() {
                writeln!(w, "{t},{slot},{},{},{b}", bn.node, coord_cells(grid, bn.node))?;
            }
        }
        w.flush()
    };
    body().map_err(|e| io_error(&path, e))
}

fn write_trace(dir: &Path, report: &OptimizationReport) -> Result<()> {
    let (path, mut w) = create(dir, "trace.csv")?;
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "iter,cost,grad_norm,step,active_fraction")?;
        for r in &report.iterates {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.iter, r.cost, r.grad_norm, r.step, r.active_fraction
            )?;
        }
        w.flush()
    };
    body().map_err(|e| io_error(&path, e))
}

fn state_summary(state: &StateTrajectory) -> Value {
    let picard = state.picard_iterations();
    json!({
        "picard_iterations_max": picard.iter().copied().max().unwrap_or(0),
        "picard_iterations_total": picard.iter().sum::<usize>(),
        "picard_iterations": picard,
        "contraction": state.contraction(),
        "energy": state.energy(),
    })
}

fn summary(config: &RunConfig, problem: &ThermistorProblem) -> serde_json::Map<String, Value> {
    let mut map = serde_json::Map::new();
    map.insert("schema_version".into(), json!(SCHEMA_VERSION));
    map.insert("mode".into(), json!(config.mode));
    map.insert(
        "grid".into(),
        json!({
            "spec": config.grid,
            "n_nodes": problem.grid.n_nodes(),
            "n_boundary": problem.grid.n_boundary(),
        }),
    );
    map.insert("time".into(), json!(config.time));
    map.insert(
        "operator".into(),
        json!(if config.run.classical { "classical" } else { "abc" }),
    );
    map.insert(
        "alpha".into(),
        if config.run.classical {
            Value::Null
        } else {
            json!(config.model.alpha)
        },
    );
    map.insert("lambda".into(), json!(config.model.lambda));
    map.insert("conductivity".into(), json!(problem.model.label()));
    map.insert("solver".into(), json!(config.solver));
    map
}

/// Runs `config` and writes every artifact into its output directory.
pub fn run(config: &RunConfig) -> Result<Outcome> {
    config.validate()?;
    let dir = &config.run.output_dir;
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    write_text(dir, "resolved.toml", &emit_config(config)?)?;
    let problem = config.build_problem()?;
    let beta = config.build_control(&problem)?;
    let grid = &*problem.grid;
    let times = problem.time().nodes();
    let mut map = summary(config, &problem);

    match config.mode {
        Mode::Simulate => {
            let state = solve_state(&problem, &beta)?;
            write_trajectory(dir, "state_trajectory.csv", "u", grid, &times, state.values())?;
            map.insert("state".into(), state_summary(&state));
            map.insert("cost".into(), json!(evaluate_cost(&state, &beta)?));
            write_json(dir, "summary.json", &map)?;
            Ok(Outcome::Success)
        }
        Mode::Optimize | Mode::Fbs => {
            let options = config.optimizer_options();
            let report = if config.mode == Mode::Optimize {
                minimize(&problem, &beta, &options)?
            } else {
                forward_backward_sweep(&problem, &beta, &options)?
            };
            write_trajectory(dir, "state_trajectory.csv", "u", grid, &times, report.state.values())?;
            write_trajectory(
                dir,
                "adjoint_trajectory.csv",
                "v",
                grid,
                &times,
                report.adjoint.values(),
            )?;
            write_control(dir, grid, &times, &report.beta)?;
            write_trace(dir, &report)?;
            map.insert("state".into(), state_summary(&report.state));
            map.insert("cost".into(), json!(report.cost));
            map.insert(
                "optimizer".into(),
                json!({
                    "options": config.optimizer,
                    "converged": report.converged,
                    "message": report.message,
                    "iterations": report.iterates.len().saturating_sub(1),
                    "final_grad_norm": report.iterates.last().map(|r| r.grad_norm),
                }),
            );
            write_json(dir, "summary.json", &map)?;
            Ok(if report.converged {
                Outcome::Success
            } else {
                Outcome::Unmet
            })
        }
        Mode::Verify => {
            let report = run_suite(&problem, &beta, config.optimizer.adjoint, config.run.seed)?;
            write_json(dir, "verify_report.json", &report)?;
            Ok(if report.all_passed {
                Outcome::Success
            } else {
                Outcome::Unmet
            })
        }
    }
}

/// Writes `error.json` into `dir`; failures to write are ignored since the
/// error is also printed.
pub fn write_error(dir: &Path, mode: Mode, error: &Error) {
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "mode": mode,
        "error": { "kind": error.kind(), "message": error.to_string() },
    });
    if fs::create_dir_all(dir).is_ok() {
        let _ = write_json(dir, "error.json", &value);
    }
}
