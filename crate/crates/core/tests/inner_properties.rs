//! The augmented cost ψ checked against independent formulas and finite differences.

mod common;

use common::psi_fd_relative_error;
use panalm::bench::{mhe, nmpc, rosenbrock, Encoding};
use panalm::oracle::grid_minimize;
use panalm::{ConstraintSet, InnerOracle, ProblemDefinition};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FD_TOL: f64 = 1e-5;

#[test]
fn gradient_matches_finite_differences_rosenbrock() {
    for e in Encoding::ALL {
        let err = psi_fd_relative_error(&rosenbrock::problem(e), &rosenbrock::DEFAULT_PARAMETER, 1e3, 1.0, 100, 1);
        assert!(err <= FD_TOL, "{e}: {err:e}");
    }
}

#[test]
fn gradient_matches_finite_differences_nmpc() {
    let x0 = nmpc::INITIAL_STATE;
    let p = [x0[0], x0[1], x0[2], x0[3], 0.1, -0.1];
    for e in Encoding::ALL {
        let problem = nmpc::NmpcProblem::default().problem(e);
        let err = psi_fd_relative_error(&problem, &p, 500.0, 0.3, 100, 2);
        assert!(err <= FD_TOL, "{e}: {err:e}");
    }
}

#[test]
fn gradient_matches_finite_differences_mhe() {
    let plant = mhe::simulate_plant(50, &mut ChaCha8Rng::seed_from_u64(9), 1.0);
    let problem = mhe::MheProblem::new(50).problem();
    let err = psi_fd_relative_error(&problem, &plant.measurements, 200.0, 1.0, 100, 3);
    assert!(err <= FD_TOL, "{err:e}");
}

/// min ‖u − t‖² with penalty `F2(u) = u₀ + u₁ − 1` and ALM `F1(u) = u`, `C` a finite set.
fn toy(set_c: ConstraintSet) -> ProblemDefinition {
    ProblemDefinition::new(
        2,
        2,
        |u, p| (u[0] - p[0]).powi(2) + (u[1] - p[1]).powi(2),
        |u, p, g| {
            g[0] = 2.0 * (u[0] - p[0]);
            g[1] = 2.0 * (u[1] - p[1]);
        },
        ConstraintSet::WholeSpace,
    )
    .with_aug_lagrangian_constraints(
        2,
        |u, _, out| {
            out[0] = u[0] * u[1];
            out[1] = u[0] - u[1];
        },
        |u, _, w, out| {
            out[0] = u[1] * w[0] + w[1];
            out[1] = u[0] * w[0] - w[1];
        },
        set_c,
    )
    .with_penalty_constraints(
        1,
        |u, _, out| out[0] = u[0] + u[1] - 1.0,
        |u, _, g| {
            let r = u[0] + u[1] - 1.0;
            g[0] = 2.0 * r;
            g[1] = 2.0 * r;
        },
    )
}

fn grid_set() -> ConstraintSet {
    let mut pts = Vec::new();
    for i in -3..=3 {
        for j in -3..=3 {
            pts.push(vec![i as f64 * 0.5, j as f64 * 0.5]);
        }
    }
    ConstraintSet::finite_set(pts).unwrap()
}

fn grid_points() -> Vec<[f64; 2]> {
    (-3..=3).flat_map(|i| (-3..=3).map(move |j| [i as f64 * 0.5, j as f64 * 0.5])).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    /// ψ = f + (c/2)[dist²_C(F1 + y/c) + ‖F2‖²], assembled by hand.
    #[test]
    fn psi_matches_definition(
        u in proptest::collection::vec(-2.0..2.0f64, 2),
        p in proptest::collection::vec(-2.0..2.0f64, 2),
        y in proptest::collection::vec(-5.0..5.0f64, 2),
        c in 0.1..1e3f64,
    ) {
        let problem = toy(grid_set());
        let mut oracle = InnerOracle::new(&problem, &p, c, &y).unwrap();
        let f = (u[0] - p[0]).powi(2) + (u[1] - p[1]).powi(2);
        let w = [u[0] * u[1] + y[0] / c, u[0] - u[1] + y[1] / c];
        let d2 = grid_points().iter().map(|v| (w[0] - v[0]).powi(2) + (w[1] - v[1]).powi(2)).fold(f64::INFINITY, f64::min);
        let f2 = u[0] + u[1] - 1.0;
        let expected = f + 0.5 * c * (d2 + f2 * f2);
        let psi = oracle.psi(&u).unwrap();
        prop_assert!((psi - expected).abs() <= 1e-12 * (1.0 + expected.abs()), "{psi} vs {expected}");
    }

    /// With no F1 the cost is f + (c/2)‖F2‖².
    #[test]
    fn pure_penalty_identity(
        u in proptest::collection::vec(-3.0..3.0f64, 5),
        c in 0.1..1e4f64,
    ) {
        let problem = rosenbrock::problem(Encoding::Penalty);
        prop_assume!(problem.n1 == 0);
        let p = rosenbrock::DEFAULT_PARAMETER;
        let mut oracle = InnerOracle::new(&problem, &p, c, &[]).unwrap();
        let f = (problem.cost)(&u, &p);
        let mut f2 = vec![0.0; problem.n2];
        (problem.f2.as_ref().unwrap())(&u, &p, &mut f2);
        let expected = f + 0.5 * c * f2.iter().map(|v| v * v).sum::<f64>();
        let psi = oracle.psi(&u).unwrap();
        prop_assert!((psi - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
    }

    /// With y = 0, ψ is nondecreasing in c.
    #[test]
    fn psi_nondecreasing_in_penalty(
        u in proptest::collection::vec(-2.0..2.0f64, 2),
        c in 0.1..100.0f64,
        factor in 1.0..50.0f64,
    ) {
        let problem = toy(grid_set());
        let p = [0.3, -0.7];
        let mut oracle = InnerOracle::new(&problem, &p, c, &[0.0, 0.0]).unwrap();
        let low = oracle.psi(&u).unwrap();
        oracle.set_penalty(c * factor);
        let high = oracle.psi(&u).unwrap();
        prop_assert!(high >= low * (1.0 - 1e-15));
    }

    /// min over v ∈ C of the augmented Lagrangian
    /// `f + yᵀ(F1 − v) + (c/2)‖F1 − v‖² + (c/2)‖F2‖²`, plus ‖y‖²/(2c), equals ψ;
    /// checked pointwise and after minimising over a grid of u.
    #[test]
    fn augmented_lagrangian_partial_minimum(
        p in proptest::collection::vec(-2.0..2.0f64, 2),
        y in proptest::collection::vec(-5.0..5.0f64, 2),
        c in 0.5..50.0f64,
    ) {
        let problem = toy(grid_set());
        let mut oracle = InnerOracle::new(&problem, &p, c, &y).unwrap();
        let lagrangian = |u: &[f64; 2], v: &[f64; 2]| {
            let f = (u[0] - p[0]).powi(2) + (u[1] - p[1]).powi(2);
            let g = [u[0] * u[1] - v[0], u[0] - u[1] - v[1]];
            let f2 = u[0] + u[1] - 1.0;
            f + y[0] * g[0] + y[1] * g[1] + 0.5 * c * (g[0] * g[0] + g[1] * g[1] + f2 * f2)
        };
        let y_sq = y[0] * y[0] + y[1] * y[1];
        let grid = grid_points();
        let mut best_psi = f64::INFINITY;
        let mut best_lag = f64::INFINITY;
        for u in &grid {
            let lag_min = grid.iter().map(|v| lagrangian(u, v)).fold(f64::INFINITY, f64::min) + y_sq / (2.0 * c);
            let psi = oracle.psi(u).unwrap();
            prop_assert!((psi - lag_min).abs() <= 1e-10 * (1.0 + psi.abs()), "u={u:?}: {psi} vs {lag_min}");
            best_psi = best_psi.min(psi);
            best_lag = best_lag.min(lag_min);
        }
        prop_assert!((best_psi - best_lag).abs() <= 1e-10 * (1.0 + best_psi.abs()));
    }
}

#[test]
fn toy_problem_gradient_matches_finite_differences() {
    // a convex C keeps dist² differentiable
    let problem = toy(ConstraintSet::ball2(None, 0.5).unwrap());
    let err = psi_fd_relative_error(&problem, &[0.3, -0.2], 10.0, 2.0, 100, 4);
    assert!(err <= FD_TOL, "{err:e}");
}

/// 1-D instance: f(u) = (u − 1)², F1(u) = u² − 0.5, U and C finite grids.
/// Minimising the augmented Lagrangian over (u, v) pairs and ψ over u give
/// the same value.
#[test]
fn augmented_lagrangian_partial_minimum_1d() {
    let u_grid: Vec<f64> = (0..=40).map(|i| -2.0 + 0.1 * i as f64).collect();
    let c_grid: Vec<f64> = (0..=10).map(|i| -1.0 + 0.2 * i as f64).collect();
    let set_c = ConstraintSet::finite_set(c_grid.iter().map(|&v| vec![v]).collect()).unwrap();
    let problem = ProblemDefinition::new(
        1,
        0,
        |u, _| (u[0] - 1.0).powi(2),
        |u, _, g| g[0] = 2.0 * (u[0] - 1.0),
        ConstraintSet::finite_set(u_grid.iter().map(|&v| vec![v]).collect()).unwrap(),
    )
    .with_aug_lagrangian_constraints(1, |u, _, out| out[0] = u[0] * u[0] - 0.5, |u, _, w, out| out[0] = 2.0 * u[0] * w[0], set_c);
    for (c, y) in [(1.0, 0.0), (3.0, 0.7), (10.0, -2.0), (0.5, 4.0)] {
        let mut oracle = InnerOracle::new(&problem, &[], c, &[y]).unwrap();
        let psi_min = u_grid.iter().map(|&u| oracle.psi(&[u]).unwrap()).fold(f64::INFINITY, f64::min);
        let lag_min = u_grid
            .iter()
            .flat_map(|&u| c_grid.iter().map(move |&v| (u, v)))
            .map(|(u, v)| {
                let g = u * u - 0.5 - v;
                (u - 1.0f64).powi(2) + y * g + 0.5 * c * g * g
            })
            .fold(f64::INFINITY, f64::min)
            + y * y / (2.0 * c);
        assert!((psi_min - lag_min).abs() <= 1e-12 * (1.0 + psi_min.abs()), "c={c} y={y}: {psi_min} vs {lag_min}");

        // same minimum from the generic grid search over the box hull of U
        let (_, box_min) = grid_minimize(|u| oracle.psi(u).unwrap(), &[-2.0], &[2.0], 41).unwrap();
        assert!((box_min - psi_min).abs() <= 1e-12 * (1.0 + psi_min.abs()));
    }
}
