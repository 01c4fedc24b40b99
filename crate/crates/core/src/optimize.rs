//! Cost functional `J(β) = ∫_{Q_T} u + ∫_{S_T} β²`, its gradient and the
//! optimizers over the box `m ≤ β ≤ M`.

use serde::{Deserialize, Serialize};

use crate::adjoint::{solve_adjoint, solve_discrete_adjoint, AdjointTrajectory};
use crate::error::{Error, Result};
use crate::fracops::TimeGrid;
use crate::mesh::{check_bounds, BoundaryControl, SpaceGrid};
use crate::state::{solve_state, StateTrajectory, ThermistorProblem};

/// The two terms of the cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub state_term: f64,
    pub control_term: f64,
    pub total: f64,
}

/// Boundary field over time, indexed `[time node][boundary slot]`.
pub type BoundaryField = Vec<Vec<f64>>;

fn check_field_shape(grid: &SpaceGrid, time: &TimeGrid, field: &[Vec<f64>], what: &str) -> Result<()> {
    if field.len() != time.len() || field.iter().any(|r| r.len() != grid.n_boundary()) {
        return Err(Error::Shape(format!(
            "{what} must be {} time nodes × {} boundary nodes",
            time.len(),
            grid.n_boundary()
        )));
    }
    Ok(())
}

/// `∫_{S_T} a b ds dt` with time trapezoid and boundary quadrature.
pub fn boundary_inner(grid: &SpaceGrid, time: &TimeGrid, a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    check_field_shape(grid, time, a, "first field")?;
    check_field_shape(grid, time, b, "second field")?;
    let mut acc = 0.0;
    for n in 0..time.len() {
        let row: f64 = grid
            .boundary()
            .iter()
            .enumerate()
            .map(|(s, bn)| bn.weight * a[n][s] * b[n][s])
            .sum();
        acc += time.trapezoid_weight(n) * row;
    }
    Ok(acc)
}

/// Evaluates both cost terms on the stored trajectory.
pub fn evaluate_cost(state: &StateTrajectory, beta: &BoundaryControl) -> Result<CostBreakdown> {
    let grid = state.grid();
    let time = state.time();
    beta.check_shape(grid, time.len())?;
    let state_term: f64 = (0..time.len())
        .map(|n| time.trapezoid_weight(n) * grid.weights().iter().zip(state.at(n)).map(|(w, u)| w * u).sum::<f64>())
        .sum();
    let control_term = boundary_inner(grid, time, beta.values(), beta.values())?;
    Ok(CostBreakdown {
        state_term,
        control_term,
        total: state_term + control_term,
    })
}

/// Gradient density `2β - u v` on the boundary.
pub fn control_gradient(
    state: &StateTrajectory,
    adjoint: &AdjointTrajectory,
    beta: &BoundaryControl,
) -> Result<BoundaryField> {
    let grid = state.grid();
    let time = state.time();
    beta.check_shape(grid, time.len())?;
    if adjoint.time() != time || adjoint.grid().n_nodes() != grid.n_nodes() {
        return Err(Error::Shape(
            "adjoint and state trajectories live on different grids".into(),
        ));
    }
    Ok((0..time.len())
        .map(|n| {
            grid.boundary()
                .iter()
                .enumerate()
                .map(|(s, b)| 2.0 * beta.slice(n)[s] - state.at(n)[b.node] * adjoint.at(n)[b.node])
                .collect()
        })
        .collect())
}

/// Pointwise clamp to `[lower, upper]`.
pub fn project_box(raw: &[Vec<f64>], lower: f64, upper: f64) -> Result<BoundaryControl> {
    check_bounds(lower, upper)?;
    let values = raw
        .iter()
        .map(|row| row.iter().map(|v| v.clamp(lower, upper)).collect())
        .collect();
    BoundaryControl::new(values, lower, upper)
}

fn sup_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Armijo backtracking parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmijoOptions {
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoOptions {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 30,
        }
    }
}

/// Which adjoint supplies the gradient density `2β - u v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjointScheme {
    /// Adjoint of the time-stepping scheme; exact gradient of the discrete cost.
    #[default]
    Discrete,
    /// Discretized continuous adjoint system with `v(T) = 0`; consistent up to `O(Δt)`.
    Continuous,
}

/// Stopping and relaxation parameters of both optimizers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerOptions {
    /// Tolerance on the sup norm of the projected gradient step
    /// (resp. of successive sweep iterates).
    pub tol_opt: f64,
    pub max_iters: usize,
    pub armijo: ArmijoOptions,
    /// Sweep relaxation `ω ∈ (0, 1]`.
    pub omega: f64,
    pub adjoint: AdjointScheme,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            tol_opt: 1e-6,
            max_iters: 200,
            armijo: ArmijoOptions::default(),
            omega: 0.5,
            adjoint: AdjointScheme::Discrete,
        }
    }
}

impl OptimizerOptions {
    /// KKT tolerance used for the first-order checks, `10·tol_opt`.
    pub fn tol_kkt(&self) -> f64 {
        10.0 * self.tol_opt
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol_opt > 0.0 && self.tol_opt.is_finite()) {
            return Err(Error::Config(format!("tol_opt must be positive, got {}", self.tol_opt)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(Error::Config(format!("omega must lie in (0, 1], got {}", self.omega)));
        }
        let a = &self.armijo;
        if !(a.initial_step > 0.0 && a.shrink > 0.0 && a.shrink < 1.0) {
            return Err(Error::Config(format!(
                "armijo needs initial_step > 0 and shrink in (0, 1), got {} and {}",
                a.initial_step, a.shrink
            )));
        }
        if !(a.sufficient_decrease > 0.0 && a.sufficient_decrease < 1.0) {
            return Err(Error::Config(format!(
                "armijo sufficient_decrease must lie in (0, 1), got {}",
                a.sufficient_decrease
            )));
        }
        Ok(())
    }
}

/// One row of the optimization trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterateRecord {
    pub iter: usize,
    pub cost: f64,
    /// Sup norm of `P(β - ∇J) - β`.
    pub grad_norm: f64,
    /// Accepted step length (relaxation ω for the sweep, 0 on the last row).
    pub step: f64,
    /// Fraction of control values sitting on a bound.
    pub active_fraction: f64,
}

/// Outcome of [`minimize`] or [`forward_backward_sweep`].
#[derive(Debug, Clone)]
pub struct OptimizationReport {
    pub iterates: Vec<IterateRecord>,
    pub beta: BoundaryControl,
    pub cost: CostBreakdown,
    pub converged: bool,
    /// Why the loop stopped.
    pub message: String,
    pub state: StateTrajectory,
    pub adjoint: AdjointTrajectory,
}

/// State, adjoint, cost and gradient at one control.
struct Evaluation {
    state: StateTrajectory,
    adjoint: AdjointTrajectory,
    cost: CostBreakdown,
    gradient: BoundaryField,
}

/// State, adjoint and gradient density at `beta`.
pub fn gradient_at(
    problem: &ThermistorProblem,
    beta: &BoundaryControl,
    scheme: AdjointScheme,
) -> Result<(StateTrajectory, AdjointTrajectory, BoundaryField)> {
    let e = evaluate(problem, beta, scheme)?;
    Ok((e.state, e.adjoint, e.gradient))
}

fn evaluate(problem: &ThermistorProblem, beta: &BoundaryControl, scheme: AdjointScheme) -> Result<Evaluation> {
    let state = solve_state(problem, beta)?;
    let cost = evaluate_cost(&state, beta)?;
    let adjoint = match scheme {
        AdjointScheme::Discrete => solve_discrete_adjoint(problem, &state, beta)?,
        AdjointScheme::Continuous => solve_adjoint(problem, &state, beta)?,
    };
    let gradient = control_gradient(&state, &adjoint, beta)?;
    Ok(Evaluation {
        state,
        adjoint,
        cost,
        gradient,
    })
}

fn projected_step(beta: &BoundaryControl, direction: &[Vec<f64>], step: f64) -> Result<BoundaryControl> {
    let raw: Vec<Vec<f64>> = beta
        .values()
        .iter()
        .zip(direction)
        .map(|(b, g)| b.iter().zip(g).map(|(b, g)| b - step * g).collect())
        .collect();
    project_box(&raw, beta.lower(), beta.upper())
}

/// Sup norm of the unit projected-gradient step `P(β - ∇J) - β`.
pub fn projected_gradient_norm(beta: &BoundaryControl, gradient: &[Vec<f64>]) -> Result<f64> {
    let trial = projected_step(beta, gradient, 1.0)?;
    Ok(sup_diff(trial.values(), beta.values()))
}

fn active_fraction(beta: &BoundaryControl) -> f64 {
    let total = beta.n_time() * beta.n_boundary();
    let active = beta
        .values()
        .iter()
        .flatten()
        .filter(|v| **v <= beta.lower() || **v >= beta.upper())
        .count();
    active as f64 / total.max(1) as f64
}

fn check_start(problem: &ThermistorProblem, beta: &BoundaryControl, options: &OptimizerOptions) -> Result<()> {
    options.validate()?;
    problem.check_control(beta)?;
    check_bounds(beta.lower(), beta.upper())?;
    if !beta.is_admissible() {
        return Err(Error::Domain("initial control is not admissible".into()));
    }
    Ok(())
}

/// Projected gradient descent with Armijo backtracking.
pub fn minimize(
    problem: &ThermistorProblem,
    initial: &BoundaryControl,
    options: &OptimizerOptions,
) -> Result<OptimizationReport> {
    check_start(problem, initial, options)?;
    let grid = &*problem.grid;
    let time = *problem.time();
    let armijo = options.armijo;
    let mut beta = initial.clone();
    let mut current = evaluate(problem, &beta, options.adjoint)?;
    let mut iterates = Vec::new();
    let mut step = armijo.initial_step;
    for iter in 0..options.max_iters {
        let grad_norm = projected_gradient_norm(&beta, &current.gradient)?;
        let mut record = IterateRecord {
            iter,
            cost: current.cost.total,
            grad_norm,
            step: 0.0,
            active_fraction: active_fraction(&beta),
        };
        if grad_norm < options.tol_opt {
            iterates.push(record);
            return Ok(finish(
                iterates,
                beta,
                current,
                true,
                "projected gradient below tol_opt",
            ));
        }
        // Start one expansion above the last accepted step, capped at the initial step.
        step = (step / armijo.shrink).min(armijo.initial_step);
        let mut accepted = None;
        for _ in 0..=armijo.max_backtracks {
            let trial = projected_step(&beta, &current.gradient, step)?;
            let moved: Vec<Vec<f64>> = trial
                .values()
                .iter()
                .zip(beta.values())
                .map(|(t, b)| t.iter().zip(b).map(|(t, b)| t - b).collect())
                .collect();
            let slope = boundary_inner(grid, &time, &current.gradient, &moved)?;
            let candidate = evaluate(problem, &trial, options.adjoint)?;
            if candidate.cost.total <= current.cost.total + armijo.sufficient_decrease * slope
                && candidate.cost.total < current.cost.total
            {
                accepted = Some((trial, candidate));
                break;
            }
            step *= armijo.shrink;
        }
        match accepted {
            Some((trial, candidate)) => {
                record.step = step;
                iterates.push(record);
                assert!(trial.is_admissible());
                beta = trial;
                current = candidate;
            }
            None => {
                iterates.push(record);
                return Ok(finish(iterates, beta, current, false, "line search failed"));
            }
        }
    }
    let grad_norm = projected_gradient_norm(&beta, &current.gradient)?;
    let converged = grad_norm < options.tol_opt;
    iterates.push(IterateRecord {
        iter: options.max_iters,
        cost: current.cost.total,
        grad_norm,
        step: 0.0,
        active_fraction: active_fraction(&beta),
    });
    let message = if converged {
        "projected gradient below tol_opt"
    } else {
        "max_iters reached"
    };
    Ok(finish(iterates, beta, current, converged, message))
}

fn finish(
    iterates: Vec<IterateRecord>,
    beta: BoundaryControl,
    eval: Evaluation,
    converged: bool,
    message: &str,
) -> OptimizationReport {
    OptimizationReport {
        iterates,
        beta,
        cost: eval.cost,
        converged,
        message: message.to_string(),
        state: eval.state,
        adjoint: eval.adjoint,
    }
}

/// Fixed-point sweep on the optimality system:
/// `β ← P((1-ω)β + ω u v / 2)`.
pub fn forward_backward_sweep(
    problem: &ThermistorProblem,
    initial: &BoundaryControl,
    options: &OptimizerOptions,
) -> Result<OptimizationReport> {
    check_start(problem, initial, options)?;
    let omega = options.omega;
    let mut beta = initial.clone();
    let mut iterates = Vec::new();
    let mut changes: Vec<f64> = Vec::new();
    let mut current = evaluate(problem, &beta, options.adjoint)?;
    for iter in 0..options.max_iters {
        let grad_norm = projected_gradient_norm(&beta, &current.gradient)?;
        let state = &current.state;
        let adjoint = &current.adjoint;
        let raw: Vec<Vec<f64>> = (0..beta.n_time())
            .map(|n| {
                problem
                    .grid
                    .boundary()
                    .iter()
                    .enumerate()
                    .map(|(s, b)| {
                        let target = 0.5 * state.at(n)[b.node] * adjoint.at(n)[b.node];
                        (1.0 - omega) * beta.slice(n)[s] + omega * target
                    })
                    .collect()
            })
            .collect();
        let next = project_box(&raw, beta.lower(), beta.upper())?;
        let change = sup_diff(next.values(), beta.values());
        iterates.push(IterateRecord {
            iter,
            cost: current.cost.total,
            grad_norm,
            step: omega,
            active_fraction: active_fraction(&beta),
        });
        if change < options.tol_opt {
            return Ok(finish(
                iterates,
                beta,
                current,
                true,
                "successive controls below tol_opt",
            ));
        }
        changes.push(change);
        if oscillating(&changes) {
            return Err(Error::Divergence(format!(
                "control updates stopped contracting (last changes {:?}); reduce omega (currently {omega})",
                &changes[changes.len() - 4..]
            )));
        }
        beta = next;
        current = evaluate(problem, &beta, options.adjoint)?;
    }
    let message = "max_iters reached";
    Ok(finish(iterates, beta, current, false, message))
}

/// Flags a sweep whose update sizes have grown over four consecutive checks,
/// or exploded past the size of the first update.
fn oscillating(changes: &[f64]) -> bool {
    let n = changes.len();
    if n >= 2 && changes[n - 1] > 10.0 * changes[0] {
        return true;
    }
    n >= 5 && changes[n - 4..].windows(2).all(|w| w[1] >= w[0])
}
