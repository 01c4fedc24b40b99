//! Closed-form oracles and the reference problem.
//!
//! For one mode `D y + λ y = f` (constant `f`, `y(0) = y₀`) the AB integral
//! inverts to
//!
//! ```text
//! y(t) = ζ y₀ E_α(-γ_λ t^α) + (1-α) ζ f / B + K f t^α E_{α,α+1}(-γ_λ t^α),
//! ζ = B / (B + λ(1-α)),   γ_λ = λα / (B + λ(1-α)),   K = α ζ² / B,
//! ```
//!
//! for `t > 0`. The value jumps from `y₀` at `t = 0` to `ζ y₀ + (1-α)ζ f/B`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adjoint::{solve_adjoint, solve_discrete_adjoint};
use crate::error::Result;
use crate::fracops::{
    abc_integral, apply_abc_left, apply_abc_right, build_abc_weights, solve_scalar_relaxation, AbcWeights,
    FractionalOrder, TimeGrid, TimeOperator,
};
use crate::mesh::{apply_laplacian_robin, BoundaryControl, GridSpec, SpaceGrid};
use crate::mlf::{gamma, mlf_eval, MlfParams};
use crate::optimize::{boundary_inner, control_gradient, evaluate_cost, AdjointScheme};
use crate::state::{
    solve_fixed_source, solve_state, weak_residual, ConductivityModel, PicardOptions, ThermistorProblem,
};

/// Order used by the reference problem.
pub const REFERENCE_ALPHA: f64 = 0.7;
pub const REFERENCE_T: f64 = 1.0;
pub const REFERENCE_LAMBDA: f64 = 1.0;
pub const REFERENCE_M: f64 = 0.1;
pub const REFERENCE_UPPER: f64 = 2.0;

/// Constants `(ζ, γ_λ, K)` of the mode solution.
pub fn mode_constants(order: &FractionalOrder, eigenvalue: f64) -> (f64, f64, f64) {
    let (a, b) = (order.alpha(), order.b_alpha());
    let denom = b + eigenvalue * (1.0 - a);
    let zeta = b / denom;
    (zeta, eigenvalue * a / denom, a * zeta * zeta / b)
}

/// Exact solution of `D y + λ y = f`, `y(0) = y₀`.
pub fn mode_solution(order: &FractionalOrder, eigenvalue: f64, y0: f64, f: f64, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(y0);
    }
    let a = order.alpha();
    let (zeta, g, k) = mode_constants(order, eigenvalue);
    let z = -g * t.powf(a);
    let e1 = mlf_eval(MlfParams::new(a, 1.0)?, z)?;
    let e2 = mlf_eval(MlfParams::new(a, a + 1.0)?, z)?;
    Ok(zeta * y0 * e1 + (1.0 - a) * zeta * f / order.b_alpha() + k * f * t.powf(a) * e2)
}

/// Exact solution of the relaxation `D y = -μ y`, `y(0) = 1`.
pub fn relaxation_solution(order: &FractionalOrder, mu: f64, t: f64) -> Result<f64> {
    mode_solution(order, mu, 1.0, 0.0, t)
}

/// `|y(t) - y(0) - I[h](t)|`, with the AB integral
/// `I[h](t) = (1-α)/B h(t) + α/(B Γ(α)) ∫_0^t (t-τ)^{α-1} h(τ) dτ`
/// evaluated by composite Simpson on `n_quad` panels after the substitutions
/// `s = (t-τ)^α` and a cubic grading toward `τ = 0`.
pub fn ab_residual(
    order: &FractionalOrder,
    y: impl Fn(f64) -> f64,
    h: impl Fn(f64) -> f64,
    t: f64,
    n_quad: usize,
) -> Result<f64> {
    let (a, b) = (order.alpha(), order.b_alpha());
    let top = t.powf(a);
    let q = 3.0;
    let integrand = |x: f64| {
        // s = top (1 - (1-x)^q)
        let r = 1.0 - x;
        let s = top * (1.0 - r.powf(q));
        let tau = (t - s.powf(1.0 / a)).max(0.0);
        h(tau) * top * q * r.powf(q - 1.0)
    };
    let n = n_quad + n_quad % 2;
    let dx = 1.0 / n as f64;
    let mut sum = integrand(0.0) + integrand(1.0);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * integrand(k as f64 * dx);
    }
    let memory = sum * dx / 3.0 / (b * gamma(a)?);
    let integral = (1.0 - a) / b * h(t) + memory;
    Ok((y(t) - y(0.0) - integral).abs())
}

/// Eigenvalue of the discrete Neumann operator on `cos(iπx)`:
/// `4/h² sin²(iπh/2)`.
pub fn discrete_neumann_eigenvalue(h: f64, i: usize) -> f64 {
    let s = (i as f64 * PI * h / 2.0).sin();
    4.0 * s * s / (h * h)
}

/// Coefficients of the eight-mode initial state and source used by the
/// eigenfunction oracle.
pub fn eigen_test_modes() -> ([f64; 8], [f64; 8]) {
    let mut y0 = [0.0; 8];
    let mut f = [0.0; 8];
    for i in 0..8 {
        y0[i] = 1.0 / (1.0 + i as f64);
        f[i] = if i % 2 == 0 { 1.0 } else { -0.5 } / (1.0 + (i * i) as f64);
    }
    (y0, f)
}

/// Sup error (over nodes and time nodes) of the fixed-source solver on the unit
/// interval with `β = 0` against the modal expansion.
pub fn eigen_oracle_error(alpha: f64, n_x: usize, n_t: usize, t_final: f64) -> Result<f64> {
    let order = FractionalOrder::new(alpha)?;
    let grid = SpaceGrid::new(GridSpec::Interval {
        length: 1.0,
        n_cells: n_x,
    })?;
    let time = TimeGrid::new(t_final, n_t)?;
    let weights = build_abc_weights(order, time)?;
    let (y0, f) = eigen_test_modes();
    let h = grid.spacing()[0];
    let xs: Vec<f64> = grid.coords().iter().map(|c| c[0]).collect();
    let expand = |c: &[f64; 8]| -> Vec<f64> {
        xs.iter()
            .map(|x| c.iter().enumerate().map(|(i, a)| a * (i as f64 * PI * x).cos()).sum())
            .collect()
    };
    let beta = BoundaryControl::free(vec![vec![0.0; grid.n_boundary()]; time.len()]);
    let u = solve_fixed_source(&grid, &weights, &beta, &expand(&y0), &expand(&f))?;
    let mut worst: f64 = 0.0;
    for (n, slice) in u.iter().enumerate() {
        let t = time.node(n);
        let mut modes = [0.0; 8];
        for i in 0..8 {
            modes[i] = mode_solution(&order, discrete_neumann_eigenvalue(h, i), y0[i], f[i], t)?;
        }
        let exact = expand(&modes);
        for (a, b) in slice.iter().zip(&exact) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// Reference initial state `1 + cos(πx)/2` (the first coordinate).
pub fn reference_initial_state(grid: &SpaceGrid) -> Vec<f64> {
    grid.coords().iter().map(|c| 1.0 + 0.5 * (PI * c[0]).cos()).collect()
}

/// Reference thermistor problem on the unit interval: `f(u) = 2 + 1/(1+u²)`,
/// `λ = 1`, `T = 1`, `u₀ = 1 + cos(πx)/2`. `alpha = None` selects backward Euler.
pub fn reference_problem(n_x: usize, n_t: usize, alpha: Option<f64>) -> Result<ThermistorProblem> {
    let grid = SpaceGrid::new(GridSpec::Interval {
        length: 1.0,
        n_cells: n_x,
    })?;
    let time = TimeGrid::new(REFERENCE_T, n_t)?;
    let weights = match alpha {
        Some(a) => build_abc_weights(FractionalOrder::new(a)?, time)?,
        None => AbcWeights::classical(time),
    };
    let u0 = reference_initial_state(&grid);
    ThermistorProblem::new(
        grid,
        weights,
        ConductivityModel::reference()?,
        REFERENCE_LAMBDA,
        u0,
        PicardOptions::default(),
    )
}

/// `β ≡ (m + M)/2` on the reference problem's grids.
pub fn reference_initial_control(problem: &ThermistorProblem) -> Result<BoundaryControl> {
    BoundaryControl::constant(
        &problem.grid,
        problem.time().len(),
        0.5 * (REFERENCE_M + REFERENCE_UPPER),
        REFERENCE_M,
        REFERENCE_UPPER,
    )
}

/// Version of the verification report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One entry of the verification report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    /// Check that passes when `measured <= tolerance`.
    fn at_most(name: &str, measured: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
            detail,
        }
    }

    /// Check that passes when `measured >= tolerance`.
    fn at_least(name: &str, measured: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            passed: measured >= tolerance,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub seed: u64,
    pub all_passed: bool,
    pub checks: Vec<CheckResult>,
}

/// Runs the verification suite. The gradient and weak-residual checks use
/// `problem` and `beta`; the other checks use fixed internal sizes.
pub fn run_suite(
    problem: &ThermistorProblem,
    beta: &BoundaryControl,
    scheme: AdjointScheme,
    seed: u64,
) -> Result<VerifyReport> {
    let mut checks = vec![
        check_mlf_exp()?,
        check_mlf_cos()?,
        check_mlf_zero()?,
        check_annihilation()?,
        check_reversal()?,
        check_newton_leibniz()?,
        check_green_identity()?,
        check_relaxation()?,
        check_eigen_table(problem)?,
    ];
    checks.push(check_weak_residual(problem, beta)?);
    checks.push(check_gradient(problem, beta, scheme, seed)?);
    let all_passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        schema_version: REPORT_SCHEMA_VERSION,
        seed,
        all_passed,
        checks,
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn check_mlf_exp() -> Result<CheckResult> {
    let p = MlfParams::new(1.0, 1.0)?;
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let z = -10.0 + 20.0 * k as f64 / 999.0;
        worst = worst.max(rel(mlf_eval(p, z)?, z.exp()));
    }
    Ok(CheckResult::at_most(
        "mlf_exp",
        worst,
        1e-12,
        "E_{1,1}(z) vs exp(z), 1000 points in [-10, 10]".into(),
    ))
}

fn check_mlf_cos() -> Result<CheckResult> {
    let p = MlfParams::new(2.0, 1.0)?;
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let x = 10.0 * k as f64 / 999.0;
        worst = worst.max((mlf_eval(p, -x * x)? - x.cos()).abs());
    }
    Ok(CheckResult::at_most(
        "mlf_cos",
        worst,
        1e-10,
        "E_{2,1}(-x²) vs cos(x), 1000 points in [0, 10]".into(),
    ))
}

fn check_mlf_zero() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for a in [0.2, 0.5, 0.8, 1.0, 1.5] {
        for b in [0.5, 1.0, 1.5, 2.0, 3.5] {
            worst = worst.max(rel(mlf_eval(MlfParams::new(a, b)?, 0.0)?, 1.0 / gamma(b)?));
        }
    }
    Ok(CheckResult::at_most(
        "mlf_zero",
        worst,
        1e-13,
        "E_{α,β}(0) vs 1/Γ(β) on a 5×5 grid".into(),
    ))
}

fn check_annihilation() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for a in [0.3, 0.5, 0.7, 0.9] {
        for n in [128, 1024] {
            let w = build_abc_weights(FractionalOrder::new(a)?, TimeGrid::new(1.0, n)?)?;
            let d = apply_abc_left(&w, &vec![3.7; n + 1])?;
            let m = d.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            worst = worst.max(m / w.abs_row_sum_max());
        }
    }
    Ok(CheckResult::at_most(
        "abc_constants",
        worst,
        1e-12,
        "sup |D c| / max row sum |w|, α ∈ {0.3,0.5,0.7,0.9}, n ∈ {128,1024}".into(),
    ))
}

fn check_reversal() -> Result<CheckResult> {
    let w = build_abc_weights(FractionalOrder::new(0.6)?, TimeGrid::new(1.0, 256)?)?;
    let series: Vec<f64> = w.grid().nodes().iter().map(|t| (3.0 * t).sin() + t * t).collect();
    let right = apply_abc_right(&w, &series)?;
    let reversed: Vec<f64> = series.iter().rev().copied().collect();
    let mut left = apply_abc_left(&w, &reversed)?;
    left.reverse();
    let mismatch = right.iter().zip(&left).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(CheckResult::at_most(
        "abc_time_reversal",
        mismatch,
        0.0,
        "right operator vs reversed left operator".into(),
    ))
}

fn check_newton_leibniz() -> Result<CheckResult> {
    let order = FractionalOrder::new(0.6)?;
    let mut errs = Vec::new();
    for n in [128, 256, 512] {
        let grid = TimeGrid::new(1.0, n)?;
        let w = build_abc_weights(order, grid)?;
        let u: Vec<f64> = grid.nodes().iter().map(|t| (2.0 * t).sin() + t * t).collect();
        let back = abc_integral(order, grid, &apply_abc_left(&w, &u)?)?;
        errs.push(
            back.iter()
                .zip(&u)
                .map(|(b, x)| (b - (x - u[0])).abs())
                .fold(0.0, f64::max),
        );
    }
    let order_min = (errs[0] / errs[1]).log2().min((errs[1] / errs[2]).log2());
    Ok(CheckResult::at_least(
        "newton_leibniz_order",
        order_min,
        0.9,
        format!("sup |I[D u] - (u - u(0))| at n = 128, 256, 512: {errs:?}"),
    ))
}

fn check_green_identity() -> Result<CheckResult> {
    let grid = SpaceGrid::new(GridSpec::Rectangle {
        lx: 1.0,
        ly: 1.5,
        nx: 12,
        ny: 10,
    })?;
    let u: Vec<f64> = grid.coords().iter().map(|c| (2.0 * c[0]).sin() + c[1] * c[1]).collect();
    let v: Vec<f64> = grid.coords().iter().map(|c| (c[0] * c[1]).exp()).collect();
    let beta = vec![0.7; grid.n_boundary()];
    let au = apply_laplacian_robin(&grid, &u, &beta)?;
    let av = apply_laplacian_robin(&grid, &v, &beta)?;
    let scale = grid.inner(&u, &u).sqrt() * grid.inner(&v, &v).sqrt();
    let mismatch = (grid.inner(&au, &v) - grid.inner(&u, &av)).abs() / scale;
    Ok(CheckResult::at_most(
        "green_identity",
        mismatch,
        1e-10,
        "|⟨A u, v⟩ - ⟨u, A v⟩| / (‖u‖‖v‖) on a 12×10 rectangle".into(),
    ))
}

/// Observed order of the relaxation error on `t ∈ [0.1 T, T]`.
pub fn relaxation_orders(alpha: f64, mu: f64) -> Result<(Vec<f64>, f64)> {
    let order = FractionalOrder::new(alpha)?;
    let mut errs = Vec::new();
    for n in [256, 512, 1024] {
        let grid = TimeGrid::new(1.0, n)?;
        let w = build_abc_weights(order, grid)?;
        let u = solve_scalar_relaxation(&w, mu, &vec![0.0; n + 1], 1.0)?;
        let mut e: f64 = 0.0;
        for k in n / 10..=n {
            e = e.max((u[k] - relaxation_solution(&order, mu, grid.node(k))?).abs());
        }
        errs.push(e);
    }
    let p = (errs[0] / errs[1]).log2().min((errs[1] / errs[2]).log2());
    Ok((errs, p))
}

fn check_relaxation() -> Result<CheckResult> {
    let mut worst = f64::INFINITY;
    let mut detail = Vec::new();
    for alpha in [0.5, 0.8] {
        for mu in [1.0, 5.0] {
            let (errs, p) = relaxation_orders(alpha, mu)?;
            worst = worst.min(p);
            detail.push(format!("α={alpha} μ={mu}: {errs:?}"));
        }
    }
    Ok(CheckResult::at_least(
        "relaxation_order",
        worst,
        0.9,
        format!("max error on [0.1, 1] at n = 256, 512, 1024; {}", detail.join("; ")),
    ))
}

fn check_eigen_table(problem: &ThermistorProblem) -> Result<CheckResult> {
    let alpha = match problem.weights.operator() {
        TimeOperator::Abc { order } => order.alpha(),
        TimeOperator::Classical => REFERENCE_ALPHA,
    };
    let mut errs = Vec::new();
    for (nx, nt) in [(32, 256), (64, 512), (128, 1024)] {
        errs.push(eigen_oracle_error(alpha, nx, nt, 1.0)?);
    }
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let mut c = CheckResult::at_most(
        "eigen_oracle",
        errs[2],
        5e-3,
        format!("α={alpha}, sup error at (n_x, n_t) = (32,256), (64,512), (128,1024): {errs:?}"),
    );
    c.passed &= decreasing;
    Ok(c)
}

fn check_weak_residual(problem: &ThermistorProblem, beta: &BoundaryControl) -> Result<CheckResult> {
    let state = solve_state(problem, beta)?;
    let r = weak_residual(problem, beta, &state)?;
    Ok(CheckResult::at_most(
        "weak_residual",
        r,
        10.0 * problem.picard.tol,
        "largest nodal residual of the weak form over all steps".into(),
    ))
}

/// Smooth random direction `l(t) = Σ_{k<4} a_k cos(kπt/T)` per boundary node,
/// with `a_k ~ U(-1, 1)`.
pub fn random_direction(rng: &mut impl Rng, n_boundary: usize, time: &TimeGrid) -> Vec<Vec<f64>> {
    let coeffs: Vec<[f64; 4]> = (0..n_boundary)
        .map(|_| {
            [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ]
        })
        .collect();
    (0..time.len())
        .map(|n| {
            let t = time.node(n) / time.t_final();
            coeffs
                .iter()
                .map(|a| a.iter().enumerate().map(|(k, a)| a * (k as f64 * PI * t).cos()).sum())
                .collect()
        })
        .collect()
}

/// Central difference `(J(β + εl) - J(β - εl)) / 2ε` of the discrete cost.
pub fn cost_difference(
    problem: &ThermistorProblem,
    beta: &BoundaryControl,
    direction: &[Vec<f64>],
    eps: f64,
) -> Result<f64> {
    let shifted = |e: f64| {
        BoundaryControl::free(
            beta.values()
                .iter()
                .zip(direction)
                .map(|(b, l)| b.iter().zip(l).map(|(b, l)| b + e * l).collect())
                .collect(),
        )
    };
    let plus = shifted(eps);
    let minus = shifted(-eps);
    let jp = evaluate_cost(&solve_state(problem, &plus)?, &plus)?.total;
    let jm = evaluate_cost(&solve_state(problem, &minus)?, &minus)?.total;
    Ok((jp - jm) / (2.0 * eps))
}

fn check_gradient(
    problem: &ThermistorProblem,
    beta: &BoundaryControl,
    scheme: AdjointScheme,
    seed: u64,
) -> Result<CheckResult> {
    let state = solve_state(problem, beta)?;
    let adjoint = match scheme {
        AdjointScheme::Discrete => solve_discrete_adjoint(problem, &state, beta)?,
        AdjointScheme::Continuous => solve_adjoint(problem, &state, beta)?,
    };
    let gradient = control_gradient(&state, &adjoint, beta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for _ in 0..5 {
        let l = random_direction(&mut rng, problem.grid.n_boundary(), problem.time());
        let fd = cost_difference(problem, beta, &l, 1e-4)?;
        let ad = boundary_inner(&problem.grid, problem.time(), &gradient, &l)?;
        worst = worst.max(rel(ad, fd));
        rows.push(format!("fd={fd:.6e} adjoint={ad:.6e}"));
    }
    Ok(CheckResult::at_most(
        "gradient_fd",
        worst,
        5e-3,
        format!(
            "{scheme:?} adjoint, 5 seeded smooth directions, ε = 1e-4: {}",
            rows.join("; ")
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_solution_satisfies_integral_form() {
        let order = FractionalOrder::new(0.6).unwrap();
        for (lam, y0, f) in [(0.0, 1.0, 2.0), (3.0, 0.5, -1.0), (50.0, 1.0, 0.0)] {
            let y = |t: f64| mode_solution(&order, lam, y0, f, t).unwrap();
            let h = |t: f64| f - lam * y(t);
            for t in [0.1, 0.5, 1.0] {
                let r = ab_residual(&order, y, h, t, 10_000).unwrap();
                assert!(r < 1e-8, "λ={lam} t={t} residual {r:e}");
            }
        }
    }

    #[test]
    fn zero_eigenvalue_is_linear_growth_in_t_alpha() {
        let order = FractionalOrder::new(0.5).unwrap();
        let b = order.b_alpha();
        let t: f64 = 0.64;
        let expected = 1.0 + 0.5 / b + 0.5 / b * t.sqrt() / gamma(1.5).unwrap();
        assert!((mode_solution(&order, 0.0, 1.0, 1.0, t).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn suite_on_coarse_reference_problem() {
        let problem = reference_problem(16, 64, Some(REFERENCE_ALPHA)).unwrap();
        let beta = reference_initial_control(&problem).unwrap();
        let report = run_suite(&problem, &beta, AdjointScheme::Discrete, 7).unwrap();
        for c in &report.checks {
            assert!(c.passed, "{}: {} vs {} ({})", c.name, c.measured, c.tolerance, c.detail);
        }
        assert!(report.all_passed);
        let again = run_suite(&problem, &beta, AdjointScheme::Discrete, 7).unwrap();
        assert_eq!(report, again);
    }
}
