//! Inner-solver invariants: envelope decrease, oracle-call accounting,
//! Lipschitz backtracking, the τ = 0 special case and feasibility.

use panalm::bench::{mhe, nmpc, rosenbrock, Encoding};
use panalm::oracle::counting_wrapper;
use panalm::panoc::{estimate_lipschitz, forward_backward};
use panalm::{ConstraintSet, InnerOracle, InnerStatus, OracleFailure, PanocSettings, PanocSolver, ProblemDefinition, SmoothObjective};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// ψ(u) = ½ Σ aᵢ (uᵢ − cᵢ)²
struct Quadratic {
    a: Vec<f64>,
    c: Vec<f64>,
}

impl SmoothObjective for Quadratic {
    fn dimension(&self) -> usize {
        self.a.len()
    }
    fn value(&mut self, u: &[f64]) -> Result<f64, OracleFailure> {
        Ok(u.iter().zip(&self.a).zip(&self.c).map(|((ui, ai), ci)| 0.5 * ai * (ui - ci).powi(2)).sum())
    }
    fn gradient(&mut self, u: &[f64], g: &mut [f64]) -> Result<(), OracleFailure> {
        for i in 0..u.len() {
            g[i] = self.a[i] * (u[i] - self.c[i]);
        }
        Ok(())
    }
}

struct Rosenbrock2;

impl SmoothObjective for Rosenbrock2 {
    fn dimension(&self) -> usize {
        2
    }
    fn value(&mut self, u: &[f64]) -> Result<f64, OracleFailure> {
        Ok((1.0 - u[0]).powi(2) + 100.0 * (u[1] - u[0] * u[0]).powi(2))
    }
    fn gradient(&mut self, u: &[f64], g: &mut [f64]) -> Result<(), OracleFailure> {
        g[0] = -2.0 * (1.0 - u[0]) - 400.0 * u[0] * (u[1] - u[0] * u[0]);
        g[1] = 200.0 * (u[1] - u[0] * u[0]);
        Ok(())
    }
}

struct BenchCase {
    name: &'static str,
    problem: ProblemDefinition,
    p: Vec<f64>,
    c: f64,
}

fn bench_cases() -> Vec<BenchCase> {
    let mut cases = Vec::new();
    for e in Encoding::ALL {
        cases.push(BenchCase {
            name: if e == Encoding::Alm { "rosenbrock-alm" } else { "rosenbrock-penalty" },
            problem: rosenbrock::problem(e),
            p: rosenbrock::DEFAULT_PARAMETER.to_vec(),
            c: 1e3,
        });
        let x0 = nmpc::INITIAL_STATE;
        cases.push(BenchCase {
            name: if e == Encoding::Alm { "nmpc-alm" } else { "nmpc-penalty" },
            problem: nmpc::NmpcProblem::default().problem(e),
            p: vec![x0[0], x0[1], x0[2], x0[3], 0.0, 0.0],
            c: 500.0,
        });
    }
    let plant = mhe::simulate_plant(50, &mut ChaCha8Rng::seed_from_u64(5), 1.0);
    cases.push(BenchCase { name: "mhe-50", problem: mhe::MheProblem::new(50).problem(), p: plant.measurements, c: 200.0 });
    cases
}

#[test]
fn envelope_decreases_on_bench_problems() {
    for case in bench_cases() {
        let y = vec![0.0; case.problem.n1];
        let mut oracle = InnerOracle::new(&case.problem, &case.p, case.c, &y).unwrap();
        let mut solver = PanocSolver::new(case.problem.n, PanocSettings::default());
        solver.enable_trace();
        let mut u = vec![0.0; case.problem.n];
        let sol = solver.solve(&mut oracle, &case.problem.set_u, &mut u, 1e-6, 500, None);
        let trace = solver.take_trace();
        assert_eq!(trace.len(), sol.iterations, "{}", case.name);
        assert!(!trace.is_empty(), "{}", case.name);
        for (k, step) in trace.iter().enumerate() {
            let slack = 1e-10 * (1.0 + step.fbe_before.abs());
            assert!(
                step.fbe_after <= step.fbe_before - step.required_decrease + slack,
                "{} step {k}: {} > {} − {}",
                case.name,
                step.fbe_after,
                step.fbe_before,
                step.required_decrease
            );
        }
    }
}

#[test]
fn oracle_calls_match_accounting() {
    for case in bench_cases() {
        let (counted, counters) = counting_wrapper(&case.problem);
        let y = vec![0.0; counted.n1];
        let mut oracle = InnerOracle::new(&counted, &case.p, case.c, &y).unwrap();
        let mut solver = PanocSolver::new(counted.n, PanocSettings::default());
        for max_iters in [0, 1, 10, 200] {
            counters.reset();
            let mut u = vec![0.0; counted.n];
            let sol = solver.solve(&mut oracle, &counted.set_u, &mut u, 1e-8, max_iters, None);
            let calls = counters.snapshot();
            let (k, trials, doublings) = (sol.iterations, sol.linesearch_trials, sol.lipschitz_doublings);
            assert!(k <= max_iters);
            assert_eq!(calls.grad_cost, 3 + trials + k, "{} max_iters={max_iters}: {sol:?}", case.name);
            assert_eq!(calls.cost, 2 + trials + k + doublings, "{} max_iters={max_iters}: {sol:?}", case.name);
            assert!(trials <= k * PanocSettings::default().max_linesearch_halvings);
        }
    }
}

#[test]
fn zero_iterations_cost_three_gradients() {
    let (counted, counters) = counting_wrapper(&rosenbrock::problem(Encoding::Alm));
    let y = vec![0.0; counted.n1];
    let mut oracle = InnerOracle::new(&counted, &rosenbrock::DEFAULT_PARAMETER, 1e3, &y).unwrap();
    let mut solver = PanocSolver::new(counted.n, PanocSettings::default());
    let mut u = vec![0.1; counted.n];
    let sol = solver.solve(&mut oracle, &counted.set_u, &mut u, 1e12, 100, None);
    assert_eq!(sol.status, InnerStatus::Converged);
    assert_eq!(sol.iterations, 0);
    assert!(counters.snapshot().grad_cost <= 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn doublings_bounded_on_quadratics(
        a in proptest::collection::vec(0.01..1e4f64, 1..6),
        seed in any::<u64>(),
    ) {
        let n = a.len();
        let c: Vec<f64> = (0..n).map(|i| ((seed >> (i * 8)) & 0xff) as f64 / 25.0 - 5.0).collect();
        let mut q = Quadratic { a: a.clone(), c };
        let u0 = vec![0.3; n];
        let l0 = estimate_lipschitz(&mut q, &u0).unwrap();
        let l_true = a.iter().cloned().fold(0.0, f64::max);
        let bound = (l_true / l0).log2().ceil().max(0.0) as usize + 1;
        let mut solver = PanocSolver::new(n, PanocSettings::default());
        let mut u = u0.clone();
        let sol = solver.solve(&mut q, &ConstraintSet::ball_inf(None, 2.0).unwrap(), &mut u, 1e-9, 2000, None);
        prop_assert!(sol.lipschitz_doublings <= bound, "{} > {bound}", sol.lipschitz_doublings);
        prop_assert_eq!(sol.status, InnerStatus::Converged);
    }

    #[test]
    fn returned_point_is_feasible(
        a in proptest::collection::vec(0.1..100.0f64, 3),
        c in proptest::collection::vec(-10.0..10.0f64, 3),
        u0 in proptest::collection::vec(-10.0..10.0f64, 3),
        which in 0usize..4,
        max_iters in 0usize..50,
    ) {
        let set = match which {
            0 => ConstraintSet::ball2(Some(vec![1.0, 0.0, -1.0]), 1.5).unwrap(),
            1 => ConstraintSet::ball_inf(None, 0.5).unwrap(),
            2 => ConstraintSet::rectangle(vec![-1.0, f64::NEG_INFINITY, 0.0], vec![1.0, 2.0, f64::INFINITY]).unwrap(),
            _ => ConstraintSet::second_order_cone(0.7).unwrap(),
        };
        let mut q = Quadratic { a, c };
        let mut solver = PanocSolver::new(3, PanocSettings::default());
        let mut u = u0;
        solver.solve(&mut q, &set, &mut u, 1e-10, max_iters, None);
        prop_assert!(set.distance(&u).unwrap() <= 1e-12 * (1.0 + u.iter().map(|v| v.abs()).sum::<f64>()));
    }
}

/// With no linesearch halvings every step is τ = 0, i.e. plain projected
/// gradient with the solver's step size.
#[test]
fn no_halvings_is_projected_gradient() {
    let set = ConstraintSet::rectangle(vec![-1.0, -1.0, 0.5], vec![1.0, 0.2, 3.0]).unwrap();
    let settings = PanocSettings { max_linesearch_halvings: 0, ..PanocSettings::default() };
    let u0 = [0.5, -0.5, 1.0];
    for k in 0..8 {
        let mut q = Quadratic { a: vec![2.0; 3], c: vec![3.0, -2.0, 1.5] };
        let mut solver = PanocSolver::new(3, settings);
        solver.enable_trace();
        let mut u = u0.to_vec();
        let sol = solver.solve(&mut q, &set, &mut u, 1e-300, k, None);
        assert_eq!(sol.iterations, k);
        assert_eq!(sol.linesearch_trials, 0);
        assert!(solver.take_trace().iter().all(|s| s.tau == 0.0));

        // independent projected-gradient iteration T^{k+1}(u0)
        let mut v = u0.to_vec();
        for _ in 0..=k {
            v = forward_backward(&mut q, &set, &v, sol.gamma).unwrap();
        }
        for i in 0..3 {
            assert!((u[i] - v[i]).abs() <= 1e-14 * (1.0 + v[i].abs()), "k={k}: {u:?} vs {v:?}");
        }
    }
}

#[test]
fn rosenbrock_2d_from_classic_start() {
    let mut solver = PanocSolver::new(2, PanocSettings::default());
    let mut u = vec![-1.2, 1.0];
    let sol = solver.solve(&mut Rosenbrock2, &ConstraintSet::WholeSpace, &mut u, 1e-10, 2000, None);
    assert_eq!(sol.status, InnerStatus::Converged, "{sol:?}");
    assert!((u[0] - 1.0).abs() <= 1e-6 && (u[1] - 1.0).abs() <= 1e-6, "{u:?} after {} iterations", sol.iterations);
}

/// Smooth, mildly nonquadratic: Σ aᵢ(uᵢ − 1)² + 0.01 Σ uᵢ⁴ with aᵢ ∈ [1, 1.1].
struct Quartic;

impl SmoothObjective for Quartic {
    fn dimension(&self) -> usize {
        20
    }
    fn value(&mut self, u: &[f64]) -> Result<f64, OracleFailure> {
        Ok(u.iter().enumerate().map(|(i, v)| (1.0 + 0.005 * i as f64) * (v - 1.0).powi(2) + 0.01 * v.powi(4)).sum())
    }
    fn gradient(&mut self, u: &[f64], g: &mut [f64]) -> Result<(), OracleFailure> {
        for (i, v) in u.iter().enumerate() {
            g[i] = 2.0 * (1.0 + 0.005 * i as f64) * (v - 1.0) + 0.04 * v.powi(3);
        }
        Ok(())
    }
}

struct Counting<O> {
    inner: O,
    values: usize,
    gradients: usize,
}

impl<O: SmoothObjective> SmoothObjective for Counting<O> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }
    fn value(&mut self, u: &[f64]) -> Result<f64, OracleFailure> {
        self.values += 1;
        self.inner.value(u)
    }
    fn gradient(&mut self, u: &[f64], g: &mut [f64]) -> Result<(), OracleFailure> {
        self.gradients += 1;
        self.inner.gradient(u, g)
    }
}

/// Ten iterations, each accepting τ = 1 with no backtracking: two gradients
/// per iteration (trial point and termination test), one for the initial
/// point, one for the Lipschitz probe and one for the final termination test.
#[test]
fn ten_full_steps_gradient_budget() {
    let mut oracle = Counting { inner: Quartic, values: 0, gradients: 0 };
    let mut solver = PanocSolver::new(20, PanocSettings::default());
    solver.enable_trace();
    let mut u = vec![-2.0; 20];
    let sol = solver.solve(&mut oracle, &ConstraintSet::ball_inf(None, 2.0).unwrap(), &mut u, 1e-300, 10, None);
    let trace = solver.take_trace();
    assert_eq!(sol.iterations, 10);
    assert_eq!(sol.lipschitz_doublings, 0);
    assert!(trace.iter().all(|s| s.tau == 1.0 && s.tau_halvings == 0), "{trace:?}");
    assert!(oracle.gradients >= 10);
    assert_eq!(oracle.gradients, 2 * 10 + 3);
    assert_eq!(oracle.values, 2 * 10 + 2);
}
