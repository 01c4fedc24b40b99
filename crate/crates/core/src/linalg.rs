//! Solves with `diag(shift) + A_β`.
//!
//! One-dimensional grids use the Thomas algorithm. Rectangles use conjugate
//! gradients on the weighted system `W(diag(shift) + A_β)`, which is
//! symmetric, with a Jacobi preconditioner.

use crate::error::{Error, Result};
use crate::mesh::SpaceGrid;

/// Relative residual target for the iterative solver.
pub const CG_RTOL: f64 = 1e-13;

/// Solves `(diag(shift) + A_β) x = rhs`.
pub fn solve_shifted(grid: &SpaceGrid, beta: &[f64], shift: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    grid.check_field(shift)?;
    grid.check_field(rhs)?;
    grid.check_boundary(beta)?;
    if grid.dims() == 1 {
        let (sub, mut diag, sup) = grid.robin_bands_1d(beta);
        for (d, s) in diag.iter_mut().zip(shift) {
            *d += s;
        }
        thomas(&sub, &diag, &sup, rhs)
    } else {
        conjugate_gradient(grid, beta, shift, rhs, None)
    }
}

/// Like [`solve_shifted`] but seeded with `guess` for the iterative path.
pub fn solve_shifted_from(
    grid: &SpaceGrid,
    beta: &[f64],
    shift: &[f64],
    rhs: &[f64],
    guess: &[f64],
) -> Result<Vec<f64>> {
    if grid.dims() == 1 {
        return solve_shifted(grid, beta, shift, rhs);
    }
    grid.check_field(shift)?;
    grid.check_field(rhs)?;
    grid.check_field(guess)?;
    grid.check_boundary(beta)?;
    conjugate_gradient(grid, beta, shift, rhs, Some(guess))
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut denom = diag[0];
    for i in 0..n {
        if i > 0 {
            denom = diag[i] - sub[i] * c[i - 1];
        }
        if denom.abs() < 1e-300 || !denom.is_finite() {
            return Err(Error::Numerics(format!(
                "tridiagonal solve hit a zero pivot at row {i}"
            )));
        }
        c[i] = sup[i] / denom;
        let prev = if i > 0 { x[i - 1] } else { 0.0 };
        x[i] = (rhs[i] - sub[i] * prev) / denom;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

fn conjugate_gradient(
    grid: &SpaceGrid,
    beta: &[f64],
    shift: &[f64],
    rhs: &[f64],
    guess: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let n = grid.n_nodes();
    let w = grid.weights();
    let apply = |x: &[f64], out: &mut [f64]| {
        grid.apply_robin_into(x, beta, out);
        for i in 0..n {
            out[i] = w[i] * (out[i] + shift[i] * x[i]);
        }
    };
    let precond: Vec<f64> = grid
        .robin_diagonal(beta)
        .iter()
        .zip(shift)
        .zip(w)
        .map(|((d, s), wi)| {
            let p = wi * (d + s);
            if p > 0.0 {
                1.0 / p
            } else {
                1.0
            }
        })
        .collect();
    let b: Vec<f64> = rhs.iter().zip(w).map(|(r, wi)| r * wi).collect();
    let b_norm = norm(&b);
    let mut x = guess.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if b_norm == 0.0 && guess.is_none() {
        return Ok(x);
    }
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let target = CG_RTOL * b_norm.max(f64::MIN_POSITIVE);
    if norm(&r) <= target {
        return Ok(x);
    }
    let mut z: Vec<f64> = r.iter().zip(&precond).map(|(r, p)| r * p).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for _ in 0..(20 * n).max(100) {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Numerics(format!(
                "conjugate gradient breakdown (pᵀAp = {pap:e}); shifted operator is not positive definite"
            )));
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        if norm(&r) <= target {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * precond[i];
        }
        let rz_new = dot(&r, &z);
        let ratio = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + ratio * p[i];
        }
    }
    Err(Error::Numerics(format!(
        "conjugate gradient did not reach relative residual {CG_RTOL:e}"
    )))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
