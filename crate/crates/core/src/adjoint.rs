//! Linearized (sensitivity) and adjoint systems of the thermistor problem.
//!
//! Linearizing the source `g(u) = λ f(u)/I(u)²`, `I(u) = ∫_Ω f(u)`, gives
//!
//! ```text
//! G ψ = c ψ - p ∫_Ω f'(u) ψ,      c = λ f'(u)/I², p = 2λ f(u)/I³,
//! ```
//!
//! a diagonal part plus a rank-one part. Every step solves
//! `(a_0 + A_β - diag(c) + a bᵀ) x = r` by Sherman-Morrison on top of the
//! sparse solve with `a_0 + A_β - diag(c)`.
//!
//! The adjoint runs forward in reflected time `s = T - t`: the right
//! derivative of `v` is the left derivative of `ṽ(s) = v(T - s)`, so the
//! reflected system is an ordinary forward problem with `ṽ(0) = v(T) = 0`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fracops::{apply_abc_left, apply_abc_right, AbcWeights, TimeGrid, TimeOperator};
use crate::linalg::solve_shifted_from;
use crate::mesh::BoundaryControl;
use crate::mesh::{apply_laplacian_robin, SpaceGrid};
use crate::mlf::abc_kernel_primitive;
use crate::state::{conductivity_field, StateTrajectory, ThermistorProblem};

/// Sensitivity `ψ = u'(β) l` of the state with respect to the control.
#[derive(Debug, Clone)]
pub struct SensitivityTrajectory {
    grid: Arc<SpaceGrid>,
    time: TimeGrid,
    psi: Vec<Vec<f64>>,
}

impl SensitivityTrajectory {
    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn at(&self, n: usize) -> &[f64] {
        &self.psi[n]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.psi
    }
}

/// Adjoint state `v` on the same grids as the state.
#[derive(Debug, Clone)]
pub struct AdjointTrajectory {
    grid: Arc<SpaceGrid>,
    time: TimeGrid,
    v: Vec<Vec<f64>>,
}

impl AdjointTrajectory {
    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn at(&self, n: usize) -> &[f64] {
        &self.v[n]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.v
    }

    /// Same trajectory with every value multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            time: self.time,
            v: self.v.iter().map(|s| s.iter().map(|x| k * x).collect()).collect(),
        }
    }
}

/// Linearization of the nonlocal source around one state slice.
struct Linearization {
    c: Vec<f64>,
    f: Vec<f64>,
    df: Vec<f64>,
    /// `2λ/I³`
    rank_scale: f64,
}

impl Linearization {
    fn new(problem: &ThermistorProblem, u: &[f64]) -> Result<Self> {
        let (f, total) = conductivity_field(&problem.grid, u, &problem.model)?;
        let lambda = problem.lambda;
        let df: Vec<f64> = u.iter().map(|x| problem.model.deriv(*x)).collect();
        let c = df.iter().map(|d| lambda * d / (total * total)).collect();
        Ok(Self {
            c,
            f,
            df,
            rank_scale: 2.0 * lambda / (total * total * total),
        })
    }

    /// `(A - G) x` or its W-adjoint `(A - Gᵀ) x`.
    fn apply(&self, grid: &SpaceGrid, beta: &[f64], x: &[f64], transpose: bool) -> Result<Vec<f64>> {
        let mut out = apply_laplacian_robin(grid, x, beta)?;
        let (col, row) = self.rank_one(grid, transpose);
        let s = dot(&row, x);
        for k in 0..x.len() {
            out[k] += -self.c[k] * x[k] + col[k] * s;
        }
        Ok(out)
    }

    /// Rank-one term `a bᵀ` of `A - G` (or of `A - Gᵀ`), with the quadrature
    /// weights folded into `b`.
    fn rank_one(&self, grid: &SpaceGrid, transpose: bool) -> (Vec<f64>, Vec<f64>) {
        let w = grid.weights();
        if transpose {
            let col = self.df.clone();
            let row = self.f.iter().zip(w).map(|(f, w)| self.rank_scale * f * w).collect();
            (col, row)
        } else {
            let col = self.f.iter().map(|f| self.rank_scale * f).collect();
            let row = self.df.iter().zip(w).map(|(d, w)| d * w).collect();
            (col, row)
        }
    }

    /// Solves `(a_0 + A - G) x = r` (or the transposed operator).
    fn solve(
        &self,
        grid: &SpaceGrid,
        beta: &[f64],
        a0: f64,
        rhs: &[f64],
        guess: &[f64],
        transpose: bool,
    ) -> Result<Vec<f64>> {
        let shift: Vec<f64> = self.c.iter().map(|c| a0 - c).collect();
        let y1 = solve_shifted_from(grid, beta, &shift, rhs, guess)?;
        let (col, row) = self.rank_one(grid, transpose);
        if col.iter().all(|v| *v == 0.0) || row.iter().all(|v| *v == 0.0) {
            return Ok(y1);
        }
        let y2 = solve_shifted_from(grid, beta, &shift, &col, &vec![0.0; col.len()])?;
        let denom = 1.0 + dot(&row, &y2);
        if denom.abs() < 1e-12 {
            return Err(Error::Numerics(format!(
                "bordered system is singular: 1 + bᵀS⁻¹a = {denom:e}"
            )));
        }
        let s = dot(&row, &y1) / denom;
        Ok(y1.iter().zip(&y2).map(|(a, b)| a - s * b).collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_consistent(problem: &ThermistorProblem, state: &StateTrajectory, beta: &BoundaryControl) -> Result<()> {
    problem.check_control(beta)?;
    if state.time() != problem.time() || state.grid().n_nodes() != problem.grid.n_nodes() {
        return Err(Error::Shape("state trajectory was computed on different grids".into()));
    }
    Ok(())
}

/// Solves `D ψ + A_β ψ - G ψ = 0` with `∂ψ/∂ν + βψ + l u = 0`, `ψ(0) = 0`.
///
/// `direction` is indexed like the control, `[time node][boundary slot]`.
pub fn solve_sensitivity(
    problem: &ThermistorProblem,
    state: &StateTrajectory,
    beta: &BoundaryControl,
    direction: &[Vec<f64>],
) -> Result<SensitivityTrajectory> {
    check_consistent(problem, state, beta)?;
    let grid = &*problem.grid;
    let weights = &problem.weights;
    let n_steps = problem.time().n_steps();
    if direction.len() != n_steps + 1 {
        return Err(Error::Shape(format!(
            "direction has {} time slices, expected {}",
            direction.len(),
            n_steps + 1
        )));
    }
    let n_nodes = grid.n_nodes();
    let a0 = weights.diag();
    let mut psi = vec![vec![0.0; n_nodes]];
    let mut increments = vec![vec![0.0; n_nodes]];
    let mut hist = vec![0.0; n_nodes];
    for n in 1..=n_steps {
        grid.check_boundary(&direction[n])?;
        let b_n = beta.slice(n);
        let u = state.at(n);
        let lin = Linearization::new(problem, u)?;
        let q: Vec<f64> = grid.trace(u).iter().zip(&direction[n]).map(|(u, l)| u * l).collect();
        let load = grid.boundary_load(&q);
        weights.history_into(n, &increments, &mut hist);
        let l_prev = lin.apply(grid, b_n, &psi[n - 1], false)?;
        let rhs: Vec<f64> = (0..n_nodes).map(|k| -load[k] - hist[k] - l_prev[k]).collect();
        let delta = lin.solve(grid, b_n, a0, &rhs, &increments[n - 1], false)?;
        psi.push(psi[n - 1].iter().zip(&delta).map(|(p, d)| p + d).collect());
        increments.push(delta);
    }
    Ok(SensitivityTrajectory {
        grid: Arc::clone(&problem.grid),
        time: *problem.time(),
        psi,
    })
}

/// Solves the adjoint system `-D_T v + A_β v - Gᵀ v = 1`, `∂v/∂ν + βv = 0`,
/// `v(T) = 0`, where `-D_T` is the right derivative.
pub fn solve_adjoint(
    problem: &ThermistorProblem,
    state: &StateTrajectory,
    beta: &BoundaryControl,
) -> Result<AdjointTrajectory> {
    solve_adjoint_with_source(problem, state, beta, 1.0)
}

/// Adjoint system with the constant source `source` in place of 1.
pub fn solve_adjoint_with_source(
    problem: &ThermistorProblem,
    state: &StateTrajectory,
    beta: &BoundaryControl,
    source: f64,
) -> Result<AdjointTrajectory> {
    let n_steps = problem.time().n_steps();
    let mut v = reflected_solve(problem, state, beta, |j| n_steps - j, |_| source)?;
    v.reverse();
    Ok(AdjointTrajectory {
        grid: Arc::clone(&problem.grid),
        time: *problem.time(),
        v,
    })
}

/// Adjoint of the discrete scheme: with it, `2β - u v` is the exact gradient
/// density of the discrete cost.
///
/// Solves the reflected recursion `D_j[ν] + (A_m - Gᵀ_m) ν_j = τ_m/Δt`,
/// `m = N + 1 - j`, `ν_0 = 0`, where `τ_m` are the time trapezoid weights, and
/// returns `v_m = ν_{N+1-m} Δt/τ_m` for `m ≥ 1`, `v_0 = 0` (the control at
/// `t = 0` does not reach the state). Unlike [`solve_adjoint`], `v(T)` is
/// `O(Δt^α)` rather than 0.
pub fn solve_discrete_adjoint(
    problem: &ThermistorProblem,
    state: &StateTrajectory,
    beta: &BoundaryControl,
) -> Result<AdjointTrajectory> {
    let time = *problem.time();
    let n_steps = time.n_steps();
    let dt = time.dt();
    let nu = reflected_solve(
        problem,
        state,
        beta,
        |j| n_steps + 1 - j,
        |m| time.trapezoid_weight(m) / dt,
    )?;
    let mut v = vec![vec![0.0; problem.grid.n_nodes()]];
    for m in 1..=n_steps {
        let scale = dt / time.trapezoid_weight(m);
        v.push(nu[n_steps + 1 - m].iter().map(|x| scale * x).collect());
    }
    Ok(AdjointTrajectory {
        grid: Arc::clone(&problem.grid),
        time,
        v,
    })
}

/// Forward recursion `D_j[w] + (A_{β_n} - Gᵀ(u_n)) w_j = source(n)` with
/// `n = coeff(j)` and `w_0 = 0`; returns `w_0..w_N`.
fn reflected_solve(
    problem: &ThermistorProblem,
    state: &StateTrajectory,
    beta: &BoundaryControl,
    coeff: impl Fn(usize) -> usize,
    source: impl Fn(usize) -> f64,
) -> Result<Vec<Vec<f64>>> {
    check_consistent(problem, state, beta)?;
    let grid = &*problem.grid;
    let weights = &problem.weights;
    let n_steps = problem.time().n_steps();
    let n_nodes = grid.n_nodes();
    let a0 = weights.diag();
    let mut w = vec![vec![0.0; n_nodes]];
    let mut increments = vec![vec![0.0; n_nodes]];
    let mut hist = vec![0.0; n_nodes];
    for j in 1..=n_steps {
        let n = coeff(j);
        let b_n = beta.slice(n);
        let lin = Linearization::new(problem, state.at(n))?;
        weights.history_into(j, &increments, &mut hist);
        let l_prev = lin.apply(grid, b_n, &w[j - 1], true)?;
        let src = source(n);
        let rhs: Vec<f64> = (0..n_nodes).map(|k| src - hist[k] - l_prev[k]).collect();
        let delta = lin.solve(grid, b_n, a0, &rhs, &increments[j - 1], true)?;
        w.push(w[j - 1].iter().zip(&delta).map(|(p, d)| p + d).collect());
        increments.push(delta);
    }
    Ok(w)
}

/// Mismatch of the integration-by-parts identity
///
/// ```text
/// ∫∫ (D u + A_β u) v = ∫∫ u (R v + A_β v)
///     - c ∫_Ω u(0) ∫_0^T K(t) v(t) dt
///     + c ∫_Ω v(T) ∫_0^T u(τ) K(T-τ) dτ
/// ```
///
/// with `R` the discrete right derivative, `c = B/(1-α)` and `K` the operator
/// kernel. Time integrals use the trapezoid rule; the kernel moments are
/// integrated exactly against step averages. `beta` is one Robin coefficient
/// slice used at every time node.
pub fn duality_test(
    u: &[Vec<f64>],
    v: &[Vec<f64>],
    weights: &AbcWeights,
    grid: &SpaceGrid,
    beta: &[f64],
) -> Result<f64> {
    let time = *weights.grid();
    let len = time.len();
    if u.len() != len || v.len() != len {
        return Err(Error::Shape(format!(
            "trajectories have {} and {} slices, grid has {len} time nodes",
            u.len(),
            v.len()
        )));
    }
    let n_nodes = grid.n_nodes();
    for s in u.iter().chain(v) {
        grid.check_field(s)?;
    }
    let series = |traj: &[Vec<f64>], k: usize| -> Vec<f64> { traj.iter().map(|s| s[k]).collect() };
    let mut du = vec![vec![0.0; n_nodes]; len];
    let mut rv = vec![vec![0.0; n_nodes]; len];
    for k in 0..n_nodes {
        for (n, x) in apply_abc_left(weights, &series(u, k))?.into_iter().enumerate() {
            du[n][k] = x;
        }
        for (n, x) in apply_abc_right(weights, &series(v, k))?.into_iter().enumerate() {
            rv[n][k] = x;
        }
    }
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for n in 0..len {
        let tw = time.trapezoid_weight(n);
        let au = apply_laplacian_robin(grid, &u[n], beta)?;
        let av = apply_laplacian_robin(grid, &v[n], beta)?;
        let left: Vec<f64> = du[n].iter().zip(&au).map(|(a, b)| a + b).collect();
        let right: Vec<f64> = rv[n].iter().zip(&av).map(|(a, b)| a + b).collect();
        lhs += tw * grid.inner(&left, &v[n]);
        rhs += tw * grid.inner(&u[n], &right);
    }
    if let TimeOperator::Abc { order } = weights.operator() {
        let c = order.derivative_scale();
        let dt = time.dt();
        let n_steps = time.n_steps();
        // mass[m] = ∫_{mΔt}^{(m+1)Δt} K
        let mut primitive = Vec::with_capacity(n_steps + 1);
        for m in 0..=n_steps {
            primitive.push(abc_kernel_primitive(&order, m as f64 * dt)?);
        }
        let mass: Vec<f64> = primitive.windows(2).map(|p| p[1] - p[0]).collect();
        let avg = |traj: &[Vec<f64>], j: usize, k: usize| 0.5 * (traj[j][k] + traj[j + 1][k]);
        let mut start = vec![0.0; n_nodes];
        let mut end = vec![0.0; n_nodes];
        for k in 0..n_nodes {
            // ∫ K(t) v(t) dt and ∫ u(τ) K(T-τ) dτ
            start[k] = (0..n_steps).map(|j| mass[j] * avg(v, j, k)).sum();
            end[k] = (0..n_steps).map(|j| mass[n_steps - 1 - j] * avg(u, j, k)).sum();
        }
        rhs -= c * grid.inner(&u[0], &start);
        rhs += c * grid.inner(&v[n_steps], &end);
    } else {
        // classical limit: boundary terms u(T)v(T) - u(0)v(0)
        rhs += grid.inner(&u[len - 1], &v[len - 1]) - grid.inner(&u[0], &v[0]);
    }
    Ok((lhs - rhs).abs())
}
