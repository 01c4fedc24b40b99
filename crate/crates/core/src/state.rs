//! Forward nonlocal thermistor problem
//!
//! ```text
//! D u - Δu = λ f(u) / (∫_Ω f(u) dx)²   in Ω × (0, T),
//! ∂u/∂ν = -β u                         on ∂Ω × (0, T),
//! u(0) = u₀.
//! ```
//!
//! Each time step solves `(a_0 + A_β) δ_n = g(u_n) - hist_n - A_β u_{n-1}` for the
//! increment `δ_n = u_n - u_{n-1}`, with the nonlocal source frozen at the
//! previous Picard iterate.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracops::{apply_abc_left, AbcWeights, TimeGrid};
use crate::linalg::solve_shifted_from;
use crate::mesh::{apply_laplacian_robin, integrate_domain, BoundaryControl, SpaceGrid};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Sample points used to validate a conductivity model.
const SAMPLE_RANGE: f64 = 50.0;
const SAMPLE_COUNT: usize = 2001;
const DERIV_RTOL: f64 = 1e-6;

/// Named conductivity models, as written in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConductivitySpec {
    /// `f(u) = 2 + 1/(1 + u²)`.
    Reference,
    /// `f(u) = value`.
    Constant { value: f64 },
    /// `f(u) = offset + sin(u)`, `offset > 1`.
    SinShift { offset: f64 },
    /// Monotone cubic Hermite interpolation through `(u, f)` samples,
    /// held constant outside the table.
    Tabulated { u: Vec<f64>, f: Vec<f64> },
}

/// Conductivity `f` with its derivative and the constants of the hypotheses
/// `c₁ ≤ f ≤ c₂`, `|f(ξ) - f(η)| ≤ L |ξ - η|`.
#[derive(Clone)]
pub struct ConductivityModel {
    label: String,
    eval: ScalarFn,
    deriv: ScalarFn,
    c1: f64,
    c2: f64,
    lipschitz: f64,
}

impl fmt::Debug for ConductivityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConductivityModel")
            .field("label", &self.label)
            .field("c1", &self.c1)
            .field("c2", &self.c2)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl ConductivityModel {
    /// Builds a model and validates bounds, Lipschitz constant and derivative
    /// on a sample grid of `[-50, 50]`.
    pub fn new<F, G>(label: impl Into<String>, eval: F, deriv: G, c1: f64, c2: f64, lipschitz: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let model = Self {
            label: label.into(),
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
            c1,
            c2,
            lipschitz,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn from_spec(spec: &ConductivitySpec) -> Result<Self> {
        match spec {
            ConductivitySpec::Reference => Self::reference(),
            ConductivitySpec::Constant { value } => Self::constant(*value),
            ConductivitySpec::SinShift { offset } => {
                let a = *offset;
                if !(a > 1.0 && a.is_finite()) {
                    return Err(Error::Model(format!("sin_shift offset must exceed 1, got {a}")));
                }
                Self::new(
                    format!("{a} + sin(u)"),
                    move |u| a + u.sin(),
                    f64::cos,
                    a - 1.0,
                    a + 1.0,
                    1.0,
                )
            }
            ConductivitySpec::Tabulated { u, f } => Self::tabulated(u, f),
        }
    }

    /// `f(u) = 2 + 1/(1 + u²)`: `c₁ = 2`, `c₂ = 3`, `L = 3√3/8`.
    pub fn reference() -> Result<Self> {
        Self::new(
            "2 + 1/(1+u^2)",
            |u| 2.0 + 1.0 / (1.0 + u * u),
            |u| {
                let d = 1.0 + u * u;
                -2.0 * u / (d * d)
            },
            2.0,
            3.0,
            3.0 * 3f64.sqrt() / 8.0,
        )
    }

    pub fn constant(value: f64) -> Result<Self> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::Model(format!(
                "constant conductivity must be positive, got {value}"
            )));
        }
        // The Lipschitz constant must be positive; any positive bound holds.
        Self::new(
            format!("{value}"),
            move |_| value,
            |_| 0.0,
            value,
            value,
            f64::MIN_POSITIVE,
        )
    }

    /// Fritsch-Carlson monotone cubic through the samples, zero slope at the
    /// ends so that the constant extension stays C¹.
    pub fn tabulated(u: &[f64], f: &[f64]) -> Result<Self> {
        if u.len() != f.len() || u.len() < 2 {
            return Err(Error::Model(format!(
                "tabulated conductivity needs matching u/f arrays of length >= 2, got {} and {}",
                u.len(),
                f.len()
            )));
        }
        if u.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Model("tabulated u values must be strictly increasing".into()));
        }
        if f.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Model("tabulated f values must be positive and finite".into()));
        }
        let table = Arc::new(Pchip::new(u.to_vec(), f.to_vec()));
        let c1 = f.iter().copied().fold(f64::INFINITY, f64::min);
        let c2 = f.iter().copied().fold(0.0, f64::max);
        let lipschitz = table.max_slope().max(f64::MIN_POSITIVE);
        let (te, td) = (Arc::clone(&table), Arc::clone(&table));
        Self::new(
            format!("table({} samples)", u.len()),
            move |x| te.eval(x),
            move |x| td.deriv(x),
            c1,
            c2,
            lipschitz,
        )
    }

    fn validate(&self) -> Result<()> {
        let (c1, c2, lip) = (self.c1, self.c2, self.lipschitz);
        if !(c1 > 0.0 && c1 <= c2 && c2.is_finite()) {
            return Err(Error::Model(format!(
                "bounds must satisfy 0 < c1 <= c2, got c1 = {c1}, c2 = {c2}"
            )));
        }
        if !(lip > 0.0 && lip.is_finite()) {
            return Err(Error::Model(format!("Lipschitz constant must be positive, got {lip}")));
        }
        let step = 2.0 * SAMPLE_RANGE / (SAMPLE_COUNT - 1) as f64;
        let xs: Vec<f64> = (0..SAMPLE_COUNT).map(|k| -SAMPLE_RANGE + k as f64 * step).collect();
        let fs: Vec<f64> = xs.iter().map(|x| (self.eval)(*x)).collect();
        let slack = 1e-12 * c2;
        for (x, v) in xs.iter().zip(&fs) {
            if !(*v >= c1 - slack && *v <= c2 + slack) {
                return Err(Error::Model(format!(
                    "{}: f({x}) = {v} outside declared bounds [{c1}, {c2}]",
                    self.label
                )));
            }
        }
        for (w, x) in fs.windows(2).zip(&xs) {
            let slope = (w[1] - w[0]).abs() / step;
            if slope > lip * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::Model(format!(
                    "{}: difference quotient {slope} near u = {x} exceeds Lipschitz constant {lip}",
                    self.label
                )));
            }
        }
        for x in &xs {
            let h = 1e-7 * x.abs().max(1.0);
            let fd = ((self.eval)(x + h) - (self.eval)(x - h)) / (2.0 * h);
            let d = (self.deriv)(*x);
            let scale = d.abs().max((self.eval)(*x).abs() * 1e-3).max(lip * 1e-3);
            if (d - fd).abs() > DERIV_RTOL * scale.max(1.0) {
                return Err(Error::Model(format!(
                    "{}: derivative {d} at u = {x} disagrees with central difference {fd}",
                    self.label
                )));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, u: f64) -> f64 {
        (self.eval)(u)
    }

    pub fn deriv(&self, u: f64) -> f64 {
        (self.deriv)(u)
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// Monotone piecewise cubic Hermite interpolant.
struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let (a, b) = (delta[i - 1], delta[i]);
            if a * b > 0.0 {
                let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
                let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
                d[i] = (w1 + w2) / (w1 / a + w2 / b);
            }
        }
        Self { x, y, d }
    }

    fn locate(&self, t: f64) -> Option<(usize, f64, f64)> {
        let n = self.x.len();
        if t <= self.x[0] || t >= self.x[n - 1] {
            return None;
        }
        let i = self.x.partition_point(|v| *v <= t) - 1;
        let h = self.x[i + 1] - self.x[i];
        Some((i, h, (t - self.x[i]) / h))
    }

    fn eval(&self, t: f64) -> f64 {
        match self.locate(t) {
            None => {
                if t <= self.x[0] {
                    self.y[0]
                } else {
                    self.y[self.y.len() - 1]
                }
            }
            Some((i, h, s)) => {
                let (s2, s3) = (s * s, s * s * s);
                let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
                let h10 = s3 - 2.0 * s2 + s;
                let h01 = -2.0 * s3 + 3.0 * s2;
                let h11 = s3 - s2;
                h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
            }
        }
    }

    fn deriv(&self, t: f64) -> f64 {
        match self.locate(t) {
            None => 0.0,
            Some((i, h, s)) => {
                let s2 = s * s;
                let d00 = (6.0 * s2 - 6.0 * s) / h;
                let d10 = 3.0 * s2 - 4.0 * s + 1.0;
                let d01 = (-6.0 * s2 + 6.0 * s) / h;
                let d11 = 3.0 * s2 - 2.0 * s;
                d00 * self.y[i] + d10 * self.d[i] + d01 * self.y[i + 1] + d11 * self.d[i + 1]
            }
        }
    }

    /// Upper bound for |p'| on each cubic piece: its maximum over [0, 1] is
    /// attained at an end or at the vertex of the quadratic derivative.
    fn max_slope(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.x.len() - 1 {
            let h = self.x[i + 1] - self.x[i];
            let mut probe = vec![self.x[i], self.x[i + 1] - 1e-12 * h];
            // p'(s) = A s² + B s + C in the local variable
            let a = 6.0 * (self.y[i] - self.y[i + 1]) / h + 3.0 * (self.d[i] + self.d[i + 1]);
            let b = 6.0 * (self.y[i + 1] - self.y[i]) / h - 4.0 * self.d[i] - 2.0 * self.d[i + 1];
            if a != 0.0 {
                let s = -b / (2.0 * a);
                if s > 0.0 && s < 1.0 {
                    probe.push(self.x[i] + s * h);
                }
            }
            for t in probe {
                let inside = t.clamp(self.x[i] + 1e-12 * h, self.x[i + 1] - 1e-12 * h);
                best = best.max(self.deriv(inside).abs());
            }
            best = best.max(self.d[i].abs()).max(self.d[i + 1].abs());
        }
        best
    }
}

/// `f(u)` at every node and `∫_Ω f(u) dx`.
pub(crate) fn conductivity_field(grid: &SpaceGrid, u: &[f64], model: &ConductivityModel) -> Result<(Vec<f64>, f64)> {
    let f: Vec<f64> = u.iter().map(|v| model.eval(*v)).collect();
    let slack = 1e-12 * model.c2;
    if let Some((k, v)) = f
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= model.c1 - slack && **v <= model.c2 + slack))
    {
        return Err(Error::Model(format!(
            "f(u) = {v} at node {k} (u = {}) violates bounds [{}, {}]",
            u[k], model.c1, model.c2
        )));
    }
    let total = integrate_domain(grid, &f)?;
    if !(total > 0.0) {
        return Err(Error::Model(format!("∫f(u) = {total} is not positive")));
    }
    Ok((f, total))
}

/// `g(u) = λ f(u) / (∫_Ω f(u) dx)²`.
pub fn nonlocal_source(grid: &SpaceGrid, u_slice: &[f64], model: &ConductivityModel, lambda: f64) -> Result<Vec<f64>> {
    grid.check_field(u_slice)?;
    let (f, total) = conductivity_field(grid, u_slice, model)?;
    let scale = lambda / (total * total);
    Ok(f.into_iter().map(|v| scale * v).collect())
}

/// Picard controls for the forward solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardOptions {
    /// Stop when successive iterates differ by less than `tol` in the sup norm.
    pub tol: f64,
    pub max_picard: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_picard: 50,
        }
    }
}

impl PicardOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_picard == 0 {
            return Err(Error::Config("max_picard must be at least 1".into()));
        }
        Ok(())
    }
}

/// Problem data shared by the forward, sensitivity and adjoint solvers.
#[derive(Debug, Clone)]
pub struct ThermistorProblem {
    pub grid: Arc<SpaceGrid>,
    pub weights: Arc<AbcWeights>,
    pub model: ConductivityModel,
    pub lambda: f64,
    pub u0: Vec<f64>,
    pub picard: PicardOptions,
}

impl ThermistorProblem {
    pub fn new(
        grid: SpaceGrid,
        weights: AbcWeights,
        model: ConductivityModel,
        lambda: f64,
        u0: Vec<f64>,
        picard: PicardOptions,
    ) -> Result<Self> {
        grid.check_field(&u0)?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be non-negative, got {lambda}")));
        }
        if u0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("initial state contains non-finite values".into()));
        }
        picard.validate()?;
        Ok(Self {
            grid: Arc::new(grid),
            weights: Arc::new(weights),
            model,
            lambda,
            u0,
            picard,
        })
    }

    pub fn time(&self) -> &TimeGrid {
        self.weights.grid()
    }

    pub fn check_control(&self, beta: &BoundaryControl) -> Result<()> {
        beta.check_shape(&self.grid, self.time().len())
    }
}

/// `‖u(t)‖_{L²}` history and the ratio against the data size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyMonitor {
    pub l2_per_step: Vec<f64>,
    /// `‖u‖_{L²(Q_T)}`.
    pub l2_space_time: f64,
    /// `‖u₀‖_{L²(Ω)} + ‖g‖_{L²(Q_T)}`.
    pub data_norm: f64,
    /// `max_n ‖u(t_n)‖ / data_norm`.
    pub mu: f64,
}

/// Full time history of the computed temperature.
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    grid: Arc<SpaceGrid>,
    time: TimeGrid,
    u: Vec<Vec<f64>>,
    lambda: f64,
    picard_iterations: Vec<usize>,
    contraction: f64,
    energy: EnergyMonitor,
}

impl StateTrajectory {
    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Temperature at time node `n`.
    pub fn at(&self, n: usize) -> &[f64] {
        &self.u[n]
    }

    /// All time slices, indexed `[time node][space node]`.
    pub fn values(&self) -> &[Vec<f64>] {
        &self.u
    }

    /// Picard iterations used at each step (0 for the initial slice).
    pub fn picard_iterations(&self) -> &[usize] {
        &self.picard_iterations
    }

    /// Largest observed ratio of successive Picard corrections.
    pub fn contraction(&self) -> f64 {
        self.contraction
    }

    pub fn energy(&self) -> &EnergyMonitor {
        &self.energy
    }
}

/// Solves the forward problem for the control `beta`.
pub fn solve_state(problem: &ThermistorProblem, beta: &BoundaryControl) -> Result<StateTrajectory> {
    problem.check_control(beta)?;
    let grid = &problem.grid;
    let weights = &problem.weights;
    let time = *weights.grid();
    let n_steps = time.n_steps();
    let n_nodes = grid.n_nodes();
    let PicardOptions { tol, max_picard } = problem.picard;
    let a0 = weights.diag();
    let shift = vec![a0; n_nodes];

    let mut u = Vec::with_capacity(n_steps + 1);
    u.push(problem.u0.clone());
    let mut increments: Vec<Vec<f64>> = vec![vec![0.0; n_nodes]];
    let mut picard_iterations = vec![0];
    let mut contraction: f64 = 0.0;
    let mut hist = vec![0.0; n_nodes];
    let mut g_sq_sum = 0.0;
    let g0 = nonlocal_source(grid, &problem.u0, &problem.model, problem.lambda)?;
    g_sq_sum += time.trapezoid_weight(0) * grid.inner(&g0, &g0);

    for n in 1..=n_steps {
        weights.history_into(n, &increments, &mut hist);
        let prev = &u[n - 1];
        let b_n = beta.slice(n);
        // solve for the increment: (a_0 + A) δ = g - hist - A u_{n-1}
        let a_prev = apply_laplacian_robin(grid, prev, b_n)?;
        let base: Vec<f64> = hist.iter().zip(&a_prev).map(|(h, a)| -h - a).collect();
        let mut delta = vec![0.0; n_nodes];
        let mut iterate = prev.clone();
        let mut residuals = Vec::new();
        let floor = 1e3 * f64::EPSILON * iterate.iter().fold(1.0, |m: f64, v| m.max(v.abs()));
        let mut converged = false;
        for _ in 0..max_picard {
            let g = nonlocal_source(grid, &iterate, &problem.model, problem.lambda)?;
            let rhs: Vec<f64> = base.iter().zip(&g).map(|(b, g)| b + g).collect();
            let next_delta = solve_shifted_from(grid, b_n, &shift, &rhs, &delta)?;
            let next: Vec<f64> = prev.iter().zip(&next_delta).map(|(p, d)| p + d).collect();
            let diff = next
                .iter()
                .zip(&iterate)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            delta = next_delta;
            if let Some(last) = residuals.last().copied() {
                if last > floor.max(10.0 * tol) {
                    let ratio = diff / last;
                    contraction = contraction.max(ratio);
                    if ratio >= 1.0 {
                        residuals.push(diff);
                        return Err(Error::NonConvergence {
                            step: n,
                            iterations: residuals.len(),
                            residuals,
                        });
                    }
                }
            }
            residuals.push(diff);
            iterate = next;
            if diff < tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                step: n,
                iterations: residuals.len(),
                residuals,
            });
        }
        picard_iterations.push(residuals.len());
        let g = nonlocal_source(grid, &iterate, &problem.model, problem.lambda)?;
        g_sq_sum += time.trapezoid_weight(n) * grid.inner(&g, &g);
        increments.push(delta);
        u.push(iterate);
    }

    let l2_per_step: Vec<f64> = u.iter().map(|s| grid.inner(s, s).sqrt()).collect();
    let l2_space_time = (0..=n_steps)
        .map(|n| time.trapezoid_weight(n) * l2_per_step[n] * l2_per_step[n])
        .sum::<f64>()
        .sqrt();
    let data_norm = l2_per_step[0] + g_sq_sum.sqrt();
    let peak = l2_per_step.iter().copied().fold(0.0, f64::max);
    let mu = if data_norm > 0.0 { peak / data_norm } else { 0.0 };
    Ok(StateTrajectory {
        grid: Arc::clone(&problem.grid),
        time,
        u,
        lambda: problem.lambda,
        picard_iterations,
        contraction,
        energy: EnergyMonitor {
            l2_per_step,
            l2_space_time,
            data_norm,
            mu,
        },
    })
}

/// Linear problem `D u + A_β u = s(x)` with a time-independent source,
/// stepped like [`solve_state`]; returns `[time node][space node]`.
pub fn solve_fixed_source(
    grid: &SpaceGrid,
    weights: &AbcWeights,
    beta: &BoundaryControl,
    u0: &[f64],
    source: &[f64],
) -> Result<Vec<Vec<f64>>> {
    grid.check_field(u0)?;
    grid.check_field(source)?;
    beta.check_shape(grid, weights.grid().len())?;
    let n_nodes = grid.n_nodes();
    let a0 = weights.diag();
    let shift = vec![a0; n_nodes];
    let mut u = vec![u0.to_vec()];
    let mut increments = vec![vec![0.0; n_nodes]];
    let mut hist = vec![0.0; n_nodes];
    for n in 1..=weights.grid().n_steps() {
        weights.history_into(n, &increments, &mut hist);
        let b_n = beta.slice(n);
        let a_prev = apply_laplacian_robin(grid, &u[n - 1], b_n)?;
        let rhs: Vec<f64> = (0..n_nodes).map(|k| source[k] - hist[k] - a_prev[k]).collect();
        let delta = solve_shifted_from(grid, b_n, &shift, &rhs, &increments[n - 1])?;
        u.push(u[n - 1].iter().zip(&delta).map(|(p, d)| p + d).collect());
        increments.push(delta);
    }
    Ok(u)
}

/// Largest nodal weak-form residual
/// `∫ D u φ_i + ∫ ∇u·∇φ_i + ∫_∂Ω β u φ_i - ∫ g(u) φ_i` over all nodes and
/// time nodes `n ≥ 1`, with the stiffness assembled edge by edge and the
/// time derivative recomputed from the stored trajectory.
pub fn weak_residual(problem: &ThermistorProblem, beta: &BoundaryControl, state: &StateTrajectory) -> Result<f64> {
    problem.check_control(beta)?;
    let grid = &*problem.grid;
    let n_steps = problem.time().n_steps();
    let n_nodes = grid.n_nodes();
    let mut du = vec![vec![0.0; n_nodes]; n_steps + 1];
    for k in 0..n_nodes {
        let series: Vec<f64> = state.values().iter().map(|s| s[k]).collect();
        let d = apply_abc_left(&problem.weights, &series)?;
        for (n, v) in d.into_iter().enumerate() {
            du[n][k] = v;
        }
    }
    let mut worst: f64 = 0.0;
    for n in 1..=n_steps {
        let u = state.at(n);
        let g = nonlocal_source(grid, u, &problem.model, problem.lambda)?;
        let mut r: Vec<f64> = (0..n_nodes).map(|k| grid.weights()[k] * (du[n][k] - g[k])).collect();
        stiffness_add(grid, u, &mut r);
        for (slot, b) in grid.boundary().iter().enumerate() {
            r[b.node] += b.weight * beta.slice(n)[slot] * u[b.node];
        }
        worst = worst.max(r.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
    }
    Ok(worst)
}

/// Adds `∫ ∇u·∇φ_i` (tensor trapezoid rule) to `out`.
fn stiffness_add(grid: &SpaceGrid, u: &[f64], out: &mut [f64]) {
    let [nx, ny] = grid.shape();
    let [hx, hy] = grid.spacing();
    let lumped = |i: usize, n: usize, h: f64| {
        if n == 1 {
            1.0
        } else if i == 0 || i == n - 1 {
            0.5 * h
        } else {
            h
        }
    };
    for j in 0..ny {
        for i in 0..nx - 1 {
            let (a, b) = (j * nx + i, j * nx + i + 1);
            let flux = lumped(j, ny, hy) * (u[a] - u[b]) / hx;
            out[a] += flux;
            out[b] -= flux;
        }
    }
    if grid.dims() == 2 {
        for j in 0..ny - 1 {
            for i in 0..nx {
                let (a, b) = (j * nx + i, (j + 1) * nx + i);
                let flux = lumped(i, nx, hx) * (u[a] - u[b]) / hy;
                out[a] += flux;
                out[b] -= flux;
            }
        }
    }
}
