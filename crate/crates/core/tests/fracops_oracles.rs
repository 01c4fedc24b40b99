//! Discrete ABC operators against brute-force quadrature and analytic oracles.

use abc_thermistor::fracops::{
    abc_integral, apply_abc_left, apply_abc_right, build_abc_weights, solve_scalar_relaxation, AbcWeights,
    FractionalOrder, TimeGrid,
};
use abc_thermistor::mlf::{mlf_eval, MlfParams};

/// `E_α(-x)` by a plain Taylor sum; only used for `x ≤ 1`.
fn ml_taylor(coef: &[f64], x: f64) -> f64 {
    assert!(x <= 1.0);
    coef.iter().rev().fold(0.0, |acc, c| acc * (-x) + c)
}

fn taylor_coefficients(alpha: f64) -> Vec<f64> {
    (0..80).map(|k| 1.0 / libm::tgamma(alpha * k as f64 + 1.0)).collect()
}

/// Midpoint rule for `B/(1-α) ∫_0^t u'(τ) E_α(-γ(t-τ)^α) dτ`.
fn brute_force_left(order: &FractionalOrder, du: impl Fn(f64) -> f64, t: f64, n: usize) -> f64 {
    let h = t / n as f64;
    let (a, g) = (order.alpha(), order.gamma());
    let coef = taylor_coefficients(a);
    let s: f64 = (0..n)
        .map(|i| {
            let tau = (i as f64 + 0.5) * h;
            du(tau) * ml_taylor(&coef, g * (t - tau).powf(a))
        })
        .sum();
    order.derivative_scale() * s * h
}

fn weights(alpha: f64, t: f64, n: usize) -> AbcWeights {
    build_abc_weights(FractionalOrder::new(alpha).unwrap(), TimeGrid::new(t, n).unwrap()).unwrap()
}

#[test]
fn linear_input_matches_brute_force() {
    let w = weights(0.5, 1.0, 100);
    let order = FractionalOrder::new(0.5).unwrap();
    let u: Vec<f64> = w.grid().nodes();
    let d = apply_abc_left(&w, &u).unwrap();
    let oracle = brute_force_left(&order, |_| 1.0, 1.0, 1_000_000);
    let rel = (d[100] - oracle).abs() / oracle.abs();
    assert!(rel < 1e-4, "discrete {} vs oracle {oracle} (rel {rel:e})", d[100]);
}

#[test]
fn right_operator_of_reversed_ramp() {
    // v(t) = T - t: right derivative = B/(1-α) ∫_t^T E_α(-γ(τ-t)^α) dτ.
    let t_final = 1.0;
    let w = weights(0.5, t_final, 200);
    let order = FractionalOrder::new(0.5).unwrap();
    let nodes = w.grid().nodes();
    let v: Vec<f64> = nodes.iter().map(|t| t_final - t).collect();
    let right = apply_abc_right(&w, &v).unwrap();
    let reversed: Vec<f64> = v.iter().rev().copied().collect();
    let left_of_reversed = apply_abc_left(&w, &reversed).unwrap();
    let left_of_ramp = apply_abc_left(&w, &nodes).unwrap();
    for n in 0..=200 {
        assert_eq!(right[n], left_of_reversed[200 - n]);
        assert!((right[n] - left_of_ramp[200 - n]).abs() < 1e-12);
    }
    for n in [0, 50, 120] {
        let t = nodes[n];
        let oracle = brute_force_left(&order, |_| 1.0, t_final - t, 200_000);
        assert!((right[n] - oracle).abs() < 1e-4 * oracle.abs(), "n={n}");
    }
}

#[test]
fn refinement_against_brute_force() {
    // u = t², exact D u(1) from a fine midpoint rule.
    let order = FractionalOrder::new(0.5).unwrap();
    let oracle = brute_force_left(&order, |t| 2.0 * t, 1.0, 2_000_000);
    let mut errs = Vec::new();
    for n in [32, 64, 128, 256] {
        let w = weights(0.5, 1.0, n);
        let u: Vec<f64> = w.grid().nodes().iter().map(|t| t * t).collect();
        errs.push((apply_abc_left(&w, &u).unwrap()[n] - oracle).abs());
    }
    for pair in errs.windows(2) {
        assert!(pair[0] / pair[1] >= 1.8, "errors {errs:?}");
    }
}

#[test]
fn near_one_recovers_ordinary_derivative() {
    let w = weights(0.999, 1.0, 10_000);
    let nodes = w.grid().nodes();
    let u: Vec<f64> = nodes.iter().map(|t| t * t).collect();
    let d = apply_abc_left(&w, &u).unwrap();
    assert!((d[10_000] - 2.0).abs() <= 2e-2 * 2.0, "{}", d[10_000]);
}

#[test]
fn integral_near_one_is_running_integral() {
    let order = FractionalOrder::new(1.0 - 1e-6).unwrap();
    let grid = TimeGrid::new(2.0, 400).unwrap();
    let g: Vec<f64> = grid.nodes().iter().map(|t| t.cos()).collect();
    let out = abc_integral(order, grid, &g).unwrap();
    for (n, t) in grid.nodes().iter().enumerate().skip(20) {
        assert!((out[n] - t.sin()).abs() <= 1e-3 * t.sin().abs(), "t={t}");
    }
}

#[test]
fn newton_leibniz_composition() {
    let order = FractionalOrder::new(0.6).unwrap();
    let mut errs = Vec::new();
    for n in [128, 256, 512] {
        let grid = TimeGrid::new(1.0, n).unwrap();
        let w = build_abc_weights(order, grid).unwrap();
        let u: Vec<f64> = grid.nodes().iter().map(|t| (2.0 * t).sin() + t * t).collect();
        let d = apply_abc_left(&w, &u).unwrap();
        let back = abc_integral(order, grid, &d).unwrap();
        let err = back
            .iter()
            .zip(&u)
            .map(|(b, u0)| (b - (u0 - u[0])).abs())
            .fold(0.0, f64::max);
        errs.push(err);
    }
    let p1 = (errs[0] / errs[1]).log2();
    let p2 = (errs[1] / errs[2]).log2();
    println!("Newton-Leibniz errors {errs:?}, orders {p1:.3} {p2:.3}");
    assert!(p1 >= 0.9 && p2 >= 0.9);
}

#[test]
fn relaxation_closed_form() {
    // D u = -μ u, u(0) = 1  ⇒  u(t) = C E_α(-γ_μ t^α) for t > 0.
    for (alpha, mu) in [(0.5, 1.0), (0.8, 5.0)] {
        let order = FractionalOrder::new(alpha).unwrap();
        let b = order.b_alpha();
        let c = b / (b + (1.0 - alpha) * mu);
        let g = alpha * mu / (b + (1.0 - alpha) * mu);
        let p = MlfParams::new(alpha, 1.0).unwrap();
        let exact = |t: f64| c * mlf_eval(p, -g * t.powf(alpha)).unwrap();
        let mut errs = Vec::new();
        for n in [256, 512, 1024] {
            let grid = TimeGrid::new(1.0, n).unwrap();
            let w = build_abc_weights(order, grid).unwrap();
            let u = solve_scalar_relaxation(&w, mu, &vec![0.0; n + 1], 1.0).unwrap();
            let sup = (1..=n).map(|k| (u[k] - exact(grid.node(k))).abs()).fold(0.0, f64::max);
            let late = (n / 10..=n)
                .map(|k| (u[k] - exact(grid.node(k))).abs())
                .fold(0.0, f64::max);
            let end = (u[n] - exact(1.0)).abs();
            println!("  n={n} sup={sup:e} t>=0.1: {late:e} t=T: {end:e}");
            errs.push(late);
        }
        println!("alpha={alpha} mu={mu} errors {errs:?}");
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
    }
}
