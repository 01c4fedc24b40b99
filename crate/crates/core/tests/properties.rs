//! Randomized invariants of the special functions, operators, solvers and optimizer.

use std::f64::consts::PI;

use abc_thermistor::adjoint::{duality_test, solve_discrete_adjoint, solve_sensitivity};
use abc_thermistor::fracops::{apply_abc_left, apply_abc_right, build_abc_weights, FractionalOrder, TimeGrid};
use abc_thermistor::mesh::{apply_laplacian_robin, BoundaryControl, GridSpec, SpaceGrid};
use abc_thermistor::mlf::{gamma, mlf_eval, MlfParams};
use abc_thermistor::optimize::{boundary_inner, control_gradient, evaluate_cost, project_box};
use abc_thermistor::state::{solve_state, ConductivityModel, PicardOptions, ThermistorProblem};
use abc_thermistor::verify::{cost_difference, random_direction};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid_strategy() -> impl Strategy<Value = SpaceGrid> {
    prop_oneof![
        (4usize..40).prop_map(|n| SpaceGrid::new(GridSpec::Interval {
            length: 1.0,
            n_cells: n
        })
        .unwrap()),
        (4usize..10, 4usize..10, 0.5f64..2.0)
            .prop_map(|(nx, ny, ly)| { SpaceGrid::new(GridSpec::Rectangle { lx: 1.0, ly, nx, ny }).unwrap() }),
    ]
}

fn field(grid: &SpaceGrid, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..grid.n_nodes())
        .map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0))
        .collect()
}

fn small_problem(n_t: usize, alpha: f64) -> ThermistorProblem {
    let grid = SpaceGrid::new(GridSpec::Interval {
        length: 1.0,
        n_cells: 12,
    })
    .unwrap();
    let w = build_abc_weights(FractionalOrder::new(alpha).unwrap(), TimeGrid::new(0.5, n_t).unwrap()).unwrap();
    let u0 = grid.coords().iter().map(|c| 1.0 + 0.5 * (PI * c[0]).cos()).collect();
    ThermistorProblem::new(
        grid,
        w,
        ConductivityModel::reference().unwrap(),
        1.0,
        u0,
        PicardOptions::default(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mlf_completely_monotone_on_negative_axis(alpha in 0.1f64..1.0, extra in 0.0f64..2.0, x in 0.0f64..200.0, dx in 0.01f64..5.0) {
        let p = MlfParams::new(alpha, alpha + extra).unwrap();
        let a = mlf_eval(p, -x).unwrap();
        let b = mlf_eval(p, -(x + dx)).unwrap();
        let top = 1.0 / gamma(alpha + extra).unwrap();
        prop_assert!(a > 0.0 && a <= top * (1.0 + 1e-12));
        prop_assert!(b <= a * (1.0 + 1e-10));
    }

    #[test]
    fn mlf_recurrence(alpha in 0.1f64..1.0, beta in 0.5f64..2.0, z in -30.0f64..1.5) {
        let lhs = mlf_eval(MlfParams::new(alpha, beta).unwrap(), z).unwrap();
        let rhs = z * mlf_eval(MlfParams::new(alpha, alpha + beta).unwrap(), z).unwrap() + 1.0 / gamma(beta).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0 / gamma(beta).unwrap()), "{lhs} vs {rhs}");
    }

    #[test]
    fn mlf_matches_exp(z in -40.0f64..40.0) {
        let v = mlf_eval(MlfParams::new(1.0, 1.0).unwrap(), z).unwrap();
        prop_assert!((v - z.exp()).abs() <= 1e-12 * z.exp());
    }

    #[test]
    fn abc_left_is_linear_and_kills_constants(alpha in 0.05f64..0.99, n in 2usize..200, c in -10.0f64..10.0, k in -3.0f64..3.0, seed in 0u64..1000) {
        let w = build_abc_weights(FractionalOrder::new(alpha).unwrap(), TimeGrid::new(1.0, n).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..=n).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let v: Vec<f64> = (0..=n).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let mix: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + k * b).collect();
        let du = apply_abc_left(&w, &u).unwrap();
        let dv = apply_abc_left(&w, &v).unwrap();
        let dm = apply_abc_left(&w, &mix).unwrap();
        let scale = w.abs_row_sum_max();
        for i in 0..=n {
            prop_assert!((dm[i] - du[i] - k * dv[i]).abs() <= 1e-12 * scale * (1.0 + k.abs()));
        }
        let constant = vec![c; n + 1];
        prop_assert!(apply_abc_left(&w, &constant).unwrap().iter().all(|x| *x == 0.0));
        prop_assert!(apply_abc_right(&w, &constant).unwrap().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn robin_operator_symmetric_and_nonnegative(grid in grid_strategy(), seed in 0u64..1000, b in 0.0f64..5.0) {
        let u = field(&grid, seed);
        let v = field(&grid, seed + 1);
        let beta = vec![b; grid.n_boundary()];
        let au = apply_laplacian_robin(&grid, &u, &beta).unwrap();
        let av = apply_laplacian_robin(&grid, &v, &beta).unwrap();
        let scale = grid.inner(&au, &au).sqrt() * grid.inner(&v, &v).sqrt() + 1.0;
        prop_assert!((grid.inner(&au, &v) - grid.inner(&u, &av)).abs() <= 1e-12 * scale);
        prop_assert!(grid.inner(&au, &u) >= -1e-12 * scale);
    }

    #[test]
    fn neumann_operator_annihilates_constants(grid in grid_strategy(), c in -5.0f64..5.0) {
        let u = vec![c; grid.n_nodes()];
        let au = apply_laplacian_robin(&grid, &u, &vec![0.0; grid.n_boundary()]).unwrap();
        prop_assert!(au.iter().all(|x| x.abs() <= 1e-9 * c.abs().max(1.0)));
    }

    #[test]
    fn projection_is_idempotent_and_admissible(seed in 0u64..1000, lo in 0.01f64..1.0, width in 0.0f64..3.0) {
        let hi = lo + width;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| rand::Rng::gen_range(&mut rng, -2.0..6.0)).collect()).collect();
        let once = project_box(&raw, lo, hi).unwrap();
        prop_assert!(once.is_admissible());
        let twice = project_box(once.values(), lo, hi).unwrap();
        prop_assert_eq!(once.values(), twice.values());
        for (r, p) in raw.iter().flatten().zip(once.values().iter().flatten()) {
            if (lo..=hi).contains(r) {
                prop_assert_eq!(r, p);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sensitivity_is_linear_in_direction(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let p = small_problem(24, 0.7);
        let beta = BoundaryControl::constant(&p.grid, 25, 0.8, 0.1, 2.0).unwrap();
        let s = solve_state(&p, &beta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l1 = random_direction(&mut rng, 2, p.time());
        let l2 = random_direction(&mut rng, 2, p.time());
        let mix: Vec<Vec<f64>> = l1.iter().zip(&l2).map(|(x, y)| x.iter().zip(y).map(|(x, y)| a * x + b * y).collect()).collect();
        let p1 = solve_sensitivity(&p, &s, &beta, &l1).unwrap();
        let p2 = solve_sensitivity(&p, &s, &beta, &l2).unwrap();
        let pm = solve_sensitivity(&p, &s, &beta, &mix).unwrap();
        for n in 0..25 {
            for i in 0..p.grid.n_nodes() {
                let want = a * p1.at(n)[i] + b * p2.at(n)[i];
                prop_assert!((pm.at(n)[i] - want).abs() <= 1e-10 * (1.0 + want.abs()));
            }
        }
    }

    #[test]
    fn gateaux_ratio_converges_to_adjoint_derivative(seed in 0u64..1000) {
        let p = small_problem(24, 0.6);
        let beta = BoundaryControl::constant(&p.grid, 25, 1.0, 0.1, 2.0).unwrap();
        let s = solve_state(&p, &beta).unwrap();
        let v = solve_discrete_adjoint(&p, &s, &beta).unwrap();
        let g = control_gradient(&s, &v, &beta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = random_direction(&mut rng, 2, p.time());
        let derivative = boundary_inner(&p.grid, p.time(), &g, &l).unwrap();
        let j0 = evaluate_cost(&s, &beta).unwrap().total;
        let one_sided = |eps: f64| {
            let shifted = BoundaryControl::free(
                beta.values().iter().zip(&l).map(|(b, l)| b.iter().zip(l).map(|(b, l)| b + eps * l).collect()).collect(),
            );
            let st = solve_state(&p, &shifted).unwrap();
            (evaluate_cost(&st, &shifted).unwrap().total - j0) / eps
        };
        // The one-sided quotient is O(ε) off; halving ε halves the gap.
        let e1 = (one_sided(1e-2) - derivative).abs();
        let e2 = (one_sided(5e-3) - derivative).abs();
        prop_assert!(e2 < 0.6 * e1, "{e1:e} {e2:e}");
        let central = cost_difference(&p, &beta, &l, 1e-4).unwrap();
        prop_assert!((central - derivative).abs() <= 1e-7 * derivative.abs().max(1e-3));
    }
}

/// Smooth space-time field used by the duality check.
fn smooth(grid: &SpaceGrid, time: &TimeGrid, f: impl Fn(f64, f64) -> f64) -> Vec<Vec<f64>> {
    time.nodes()
        .iter()
        .map(|t| grid.coords().iter().map(|c| f(*t, c[0])).collect())
        .collect()
}

#[test]
fn duality_identity_is_discretely_exact() {
    let grid = SpaceGrid::new(GridSpec::Interval {
        length: 1.0,
        n_cells: 16,
    })
    .unwrap();
    let order = FractionalOrder::new(0.6).unwrap();
    for n in [32, 64, 128, 256] {
        let time = TimeGrid::new(1.0, n).unwrap();
        let w = build_abc_weights(order, time).unwrap();
        let u = smooth(&grid, &time, |t, x| (1.0 + t * t) * (PI * x).cos() + t);
        let v = smooth(&grid, &time, |t, x| (2.0 * t).sin() + x * (1.0 - t));
        let mismatch = duality_test(&u, &v, &w, &grid, &[0.5, 0.5]).unwrap();
        assert!(mismatch < 1e-13, "n = {n}: {mismatch:e}");
    }
}

#[test]
fn discrete_laplacian_of_cosine_converges_quadratically() {
    let mut errs = Vec::new();
    for n in [16, 32, 64, 128] {
        let grid = SpaceGrid::new(GridSpec::Interval {
            length: 1.0,
            n_cells: n,
        })
        .unwrap();
        let u: Vec<f64> = grid.coords().iter().map(|c| (PI * c[0]).cos()).collect();
        let au = apply_laplacian_robin(&grid, &u, &[0.0, 0.0]).unwrap();
        let e = au
            .iter()
            .zip(&u)
            .map(|(a, u)| (a - PI * PI * u).abs())
            .fold(0.0, f64::max);
        errs.push(e);
    }
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.05, "{errs:?}");
    }
}

#[test]
fn cost_of_constant_neumann_state() {
    let grid = SpaceGrid::new(GridSpec::Rectangle {
        lx: 1.0,
        ly: 2.0,
        nx: 6,
        ny: 8,
    })
    .unwrap();
    let w = build_abc_weights(FractionalOrder::new(0.5).unwrap(), TimeGrid::new(2.0, 10).unwrap()).unwrap();
    let u0 = vec![3.0; grid.n_nodes()];
    let p = ThermistorProblem::new(
        grid,
        w,
        ConductivityModel::reference().unwrap(),
        0.0,
        u0,
        PicardOptions::default(),
    )
    .unwrap();
    let beta = BoundaryControl::free(vec![vec![0.0; p.grid.n_boundary()]; 11]);
    let cost = evaluate_cost(&solve_state(&p, &beta).unwrap(), &beta).unwrap();
    assert!((cost.state_term - 3.0 * 2.0 * 2.0).abs() < 1e-12);
    assert_eq!(cost.control_term, 0.0);
    assert_eq!(cost.total, cost.state_term + cost.control_term);
}

#[test]
fn control_term_of_constant_control() {
    let p = small_problem(10, 0.5);
    let beta = BoundaryControl::constant(&p.grid, 11, 1.5, 0.1, 2.0).unwrap();
    let cost = evaluate_cost(&solve_state(&p, &beta).unwrap(), &beta).unwrap();
    // Two boundary points, T = 0.5.
    assert!((cost.control_term - 1.5 * 1.5 * 2.0 * 0.5).abs() < 1e-13);
    assert_eq!(cost.total, cost.state_term + cost.control_term);
}
