//! Discrete Atangana-Baleanu-Caputo (ABC) derivatives and the AB integral.
//!
//! The left derivative with base point 0,
//!
//! ```text
//! D u(t) = B(α)/(1-α) ∫_0^t u'(τ) E_α(-γ (t-τ)^α) dτ,   γ = α/(1-α),
//! ```
//!
//! is discretized by product integration: `u'` is piecewise constant on each
//! step and the kernel is integrated exactly through its primitive
//! `P(s) = s E_{α,2}(-γ s^α)`. The resulting operator is a Toeplitz
//! convolution of the increments,
//!
//! ```text
//! D u(t_n) = Σ_{j=1}^{n} a_{n-j} (u_j - u_{j-1}),
//! a_m = B/((1-α) Δt) · [P((m+1)Δt) - P(mΔt)],
//! ```
//!
//! so only the `n_steps` coefficients `a_m` are stored. The value at `t_0` is
//! defined as 0 (empty integral).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mlf::{abc_kernel_primitive, gamma};

/// Largest accepted order; γ = α/(1-α) diverges at 1.
pub const ALPHA_MAX: f64 = 1.0 - 1e-6;

/// Order α of the ABC operators with the derived constants γ and B(α).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FractionalOrder {
    alpha: f64,
    gamma: f64,
    b_alpha: f64,
}

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= ALPHA_MAX) {
            let hint = if alpha >= 1.0 {
                "; for the integer-order problem use the classical backward-Euler mode (--classical)"
            } else {
                ""
            };
            return Err(Error::Domain(format!(
                "fractional order must satisfy 0 < alpha <= {ALPHA_MAX}, got {alpha}{hint}"
            )));
        }
        let b_alpha = (1.0 - alpha) + alpha / gamma(alpha)?;
        Ok(Self {
            alpha,
            gamma: alpha / (1.0 - alpha),
            b_alpha,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// γ = α/(1-α).
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// B(α) = (1-α) + α/Γ(α).
    pub fn b_alpha(&self) -> f64 {
        self.b_alpha
    }

    /// B(α)/(1-α), the factor in front of the memory integral.
    pub fn derivative_scale(&self) -> f64 {
        self.b_alpha / (1.0 - self.alpha)
    }
}

/// Uniform time grid `t_n = n Δt`, `n = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    t_final: f64,
    n_steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::Config(format!("final time must be > 0, got {t_final}")));
        }
        if n_steps == 0 {
            return Err(Error::Config("number of time steps must be positive".into()));
        }
        Ok(Self {
            t_final,
            n_steps,
            dt: t_final / n_steps as f64,
        })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of time nodes, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, n: usize) -> f64 {
        if n == self.n_steps {
            self.t_final
        } else {
            n as f64 * self.dt
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.node(n)).collect()
    }

    /// Trapezoid weights in time.
    pub fn trapezoid_weight(&self, n: usize) -> f64 {
        if n == 0 || n == self.n_steps {
            0.5 * self.dt
        } else {
            self.dt
        }
    }
}

/// Which time-derivative operator a weight table realizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeOperator {
    /// ABC derivative of the given order.
    Abc { order: FractionalOrder },
    /// First-order backward difference `(u_n - u_{n-1})/Δt`.
    Classical,
}

/// Convolution coefficients of the discrete time-derivative operator.
#[derive(Debug, Clone)]
pub struct AbcWeights {
    operator: TimeOperator,
    grid: TimeGrid,
    coeffs: Vec<f64>,
}

/// Builds the product-integration weights for the ABC derivative.
pub fn build_abc_weights(order: FractionalOrder, grid: TimeGrid) -> Result<AbcWeights> {
    let n = grid.n_steps();
    let dt = grid.dt();
    let mut primitive = Vec::with_capacity(n + 1);
    for m in 0..=n {
        primitive.push(abc_kernel_primitive(&order, m as f64 * dt)?);
    }
    let scale = order.derivative_scale() / dt;
    let coeffs = primitive.windows(2).map(|w| scale * (w[1] - w[0])).collect();
    Ok(AbcWeights {
        operator: TimeOperator::Abc { order },
        grid,
        coeffs,
    })
}

impl AbcWeights {
    /// Backward-Euler weights: `a_0 = 1/Δt`, no memory.
    pub fn classical(grid: TimeGrid) -> Self {
        let mut coeffs = vec![0.0; grid.n_steps()];
        coeffs[0] = 1.0 / grid.dt();
        Self {
            operator: TimeOperator::Classical,
            grid,
            coeffs,
        }
    }

    pub fn operator(&self) -> TimeOperator {
        self.operator
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Convolution coefficients `a_m`, `m = 0..n_steps`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of the current value, `w[n][n] = a_0`.
    pub fn diag(&self) -> f64 {
        self.coeffs[0]
    }

    /// Entry `w[n][j]` of the lower-triangular weight table.
    pub fn w(&self, n: usize, j: usize) -> f64 {
        assert!(j <= n && n <= self.grid.n_steps(), "w[{n}][{j}] out of range");
        if n == 0 {
            return 0.0;
        }
        let a = &self.coeffs;
        if j == n {
            a[0]
        } else if j == 0 {
            -a[n - 1]
        } else {
            a[n - j] - a[n - j - 1]
        }
    }

    /// `Σ_j |w[n][j]|` maximized over rows; the scale of the annihilation bound.
    pub fn abs_row_sum_max(&self) -> f64 {
        let a = &self.coeffs;
        let mut acc: f64 = 0.0;
        let mut best: f64 = 0.0;
        for n in 1..=self.grid.n_steps() {
            // row n: a_0, a_{m}-a_{m-1} for m = 1..n-1, and -a_{n-1}
            if n >= 2 {
                acc += (a[n - 1] - a[n - 2]).abs();
            }
            best = best.max(a[0].abs() + acc + a[n - 1].abs());
        }
        best
    }

    /// Memory term at step `n` for scalar increments `Δu_j = u_j - u_{j-1}`:
    /// `Σ_{j=1}^{n-1} a_{n-j} Δu_j`.
    pub fn history(&self, n: usize, increments: &[f64]) -> f64 {
        (1..n).map(|j| self.coeffs[n - j] * increments[j]).sum()
    }

    /// Field version of [`AbcWeights::history`]: `out = Σ_{j=1}^{n-1} a_{n-j} Δu_j`
    /// where `increments[j]` is a nodal field.
    pub fn history_into(&self, n: usize, increments: &[Vec<f64>], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for j in 1..n {
            let a = self.coeffs[n - j];
            if a == 0.0 {
                continue;
            }
            for (o, d) in out.iter_mut().zip(&increments[j]) {
                *o += a * d;
            }
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.grid.len() {
            return Err(Error::Shape(format!(
                "time series has {len} values, grid has {} nodes",
                self.grid.len()
            )));
        }
        Ok(())
    }
}

/// Discrete left derivative at every node; position 0 is 0.
pub fn apply_abc_left(weights: &AbcWeights, series: &[f64]) -> Result<Vec<f64>> {
    weights.check_len(series.len())?;
    let n_steps = weights.grid.n_steps();
    let increments: Vec<f64> = std::iter::once(0.0)
        .chain(series.windows(2).map(|w| w[1] - w[0]))
        .collect();
    let a = &weights.coeffs;
    let mut out = vec![0.0; n_steps + 1];
    for (n, slot) in out.iter_mut().enumerate().skip(1) {
        *slot = (1..=n).map(|j| a[n - j] * increments[j]).sum();
    }
    Ok(out)
}

/// Discrete right derivative (base point T) by time reversal:
/// reverse, apply the left operator, reverse back.
pub fn apply_abc_right(weights: &AbcWeights, series: &[f64]) -> Result<Vec<f64>> {
    let reversed: Vec<f64> = series.iter().rev().copied().collect();
    let mut out = apply_abc_left(weights, &reversed)?;
    out.reverse();
    Ok(out)
}

/// AB fractional integral
/// `(1-α)/B g(t) + α/(B Γ(α)) ∫_0^t g(τ)(t-τ)^{α-1} dτ`,
/// with `g` taken constant (the step average) on each subinterval and the
/// weakly singular kernel integrated exactly.
pub fn abc_integral(order: FractionalOrder, grid: TimeGrid, series: &[f64]) -> Result<Vec<f64>> {
    if series.len() != grid.len() {
        return Err(Error::Shape(format!(
            "time series has {} values, grid has {} nodes",
            series.len(),
            grid.len()
        )));
    }
    let alpha = order.alpha();
    let b = order.b_alpha();
    let local = (1.0 - alpha) / b;
    let tail = grid.dt().powf(alpha) / (b * gamma(alpha)?);
    // ∫_{t_{j-1}}^{t_j} (t_n - τ)^{α-1} dτ = Δt^α/α · [(n-j+1)^α - (n-j)^α]
    let moments: Vec<f64> = (0..grid.n_steps())
        .map(|m| ((m + 1) as f64).powf(alpha) - (m as f64).powf(alpha))
        .collect();
    let averages: Vec<f64> = std::iter::once(0.0)
        .chain(series.windows(2).map(|w| 0.5 * (w[0] + w[1])))
        .collect();
    let out = (0..grid.len())
        .map(|n| {
            let rl: f64 = (1..=n).map(|j| moments[n - j] * averages[j]).sum();
            local * series[n] + tail * rl
        })
        .collect();
    Ok(out)
}

/// Time stepper for the scalar linear equation `D u + μ u = s(t)`, `u(0) = u0`.
///
/// Uses the same implicit convolution scheme as the field solvers.
pub fn solve_scalar_relaxation(weights: &AbcWeights, mu: f64, source: &[f64], u0: f64) -> Result<Vec<f64>> {
    weights.check_len(source.len())?;
    let n_steps = weights.grid.n_steps();
    let a0 = weights.diag();
    let mut u = vec![0.0; n_steps + 1];
    let mut inc = vec![0.0; n_steps + 1];
    u[0] = u0;
    for n in 1..=n_steps {
        let hist = weights.history(n, &inc);
        // a_0 (u_n - u_{n-1}) + hist + μ u_n = s_n
        let denom = a0 + mu;
        if denom == 0.0 {
            return Err(Error::Numerics(format!("singular scalar step at n = {n}")));
        }
        u[n] = (source[n] - hist + a0 * u[n - 1]) / denom;
        inc[n] = u[n] - u[n - 1];
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights(alpha: f64, t: f64, n: usize) -> AbcWeights {
        build_abc_weights(FractionalOrder::new(alpha).unwrap(), TimeGrid::new(t, n).unwrap()).unwrap()
    }

    #[test]
    fn order_constants() {
        let o = FractionalOrder::new(0.5).unwrap();
        assert!((o.gamma() - 1.0).abs() < 1e-15);
        let b = 0.5 + 0.5 / std::f64::consts::PI.sqrt();
        assert!((o.b_alpha() - b).abs() < 1e-15);
    }

    #[test]
    fn order_rejects_one() {
        let err = FractionalOrder::new(1.0).unwrap_err();
        assert!(err.to_string().contains("--classical"));
        assert!(FractionalOrder::new(0.0).is_err());
        assert!(FractionalOrder::new(ALPHA_MAX).is_ok());
    }

    #[test]
    fn weight_table_rows_sum_to_zero() {
        let w = weights(0.6, 1.0, 40);
        for n in 1..=40 {
            let s: f64 = (0..=n).map(|j| w.w(n, j)).sum();
            assert!(s.abs() < 1e-12 * w.abs_row_sum_max(), "row {n}: {s}");
        }
    }

    #[test]
    fn constants_are_annihilated_exactly() {
        let w = weights(0.5, 1.0, 64);
        let d = apply_abc_left(&w, &vec![3.7; 65]).unwrap();
        assert!(d.iter().all(|&x| x == 0.0));
        let d = apply_abc_right(&w, &vec![-1.25; 65]).unwrap();
        assert!(d.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn length_mismatch_is_shape_error() {
        let w = weights(0.5, 1.0, 8);
        assert!(matches!(apply_abc_left(&w, &[0.0; 5]), Err(Error::Shape(_))));
        assert!(matches!(apply_abc_right(&w, &[0.0; 10]), Err(Error::Shape(_))));
    }

    #[test]
    fn value_at_origin_is_zero() {
        let w = weights(0.3, 2.0, 10);
        let series: Vec<f64> = (0..11).map(|n| (n as f64).sin()).collect();
        assert_eq!(apply_abc_left(&w, &series).unwrap()[0], 0.0);
    }

    #[test]
    fn classical_weights_are_backward_difference() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let w = AbcWeights::classical(grid);
        let series: Vec<f64> = grid.nodes().iter().map(|t| t * t).collect();
        let d = apply_abc_left(&w, &series).unwrap();
        for n in 1..=10 {
            let want = (series[n] - series[n - 1]) / grid.dt();
            assert!((d[n] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn integral_limits() {
        // α → 0 leaves the function itself.
        let o = FractionalOrder::new(1e-3).unwrap();
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let g: Vec<f64> = grid.nodes().iter().map(|t| t.cos()).collect();
        let out = abc_integral(o, grid, &g).unwrap();
        for (a, b) in out.iter().zip(&g) {
            assert!((a - b).abs() <= 1e-2 * b.abs());
        }
    }
}
