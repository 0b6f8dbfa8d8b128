//! Defining a problem from scratch.
//!
//! ```text
//! min  u₀² + 2u₁² − u₀u₁ + p·u₀
//! s.t. u ∈ [−2, 2]²
//!      u₀ + u₁ = 1          (augmented Lagrangian, C = {0})
//!      u₀² + u₁² ≤ 0.8      (penalty, F2 = [u₀² + u₁² − 0.8]₊)
//! ```
//!
//! The gradient is checked against finite differences before solving, then
//! the problem is solved for a few parameter values reusing one solver.
//!
//! ```text
//! cargo run --example custom_problem
//! ```

use panalm::oracle::{fd_gradient, FdConfig};
use panalm::{AlmSolver, ConstraintSet, ProblemDefinition, SolverConfig};

fn main() -> panalm::Result<()> {
    let problem = ProblemDefinition::new(
        2,
        1,
        |u, p| u[0] * u[0] + 2.0 * u[1] * u[1] - u[0] * u[1] + p[0] * u[0],
        |u, p, g| {
            g[0] = 2.0 * u[0] - u[1] + p[0];
            g[1] = 4.0 * u[1] - u[0];
        },
        ConstraintSet::rectangle(vec![-2.0; 2], vec![2.0; 2])?,
    )
    .with_aug_lagrangian_constraints(
        1,
        |u, _, out| out[0] = u[0] + u[1] - 1.0,
        |_, _, w, out| out.fill(w[0]),
        ConstraintSet::Zero,
    )
    .with_penalty_constraints(
        1,
        |u, _, out| out[0] = (u[0] * u[0] + u[1] * u[1] - 0.8).max(0.0),
        |u, _, out| {
            let h = (u[0] * u[0] + u[1] * u[1] - 0.8).max(0.0);
            out[0] = 4.0 * h * u[0];
            out[1] = 4.0 * h * u[1];
        },
    );
    problem.validate()?;

    let u = [0.3, -0.7];
    let fd = fd_gradient(|v| (problem.cost)(v, &[0.5]), &u, FdConfig::default())?;
    let mut g = [0.0; 2];
    (problem.grad_cost)(&u, &[0.5], &mut g);
    println!("gradient check: analytic {g:?}, central differences {fd:?}");

    let config = SolverConfig::builder().epsilon(1e-6).delta(1e-6).build()?;
    let mut solver = AlmSolver::new(&problem, config)?;
    let mut guess = vec![0.0; 2];
    for p in [-1.0, 0.0, 0.5, 2.0] {
        let r = solver.solve(&[p], &guess, None)?;
        println!(
            "p = {p:>4}: {} after {}/{} iterations, u = ({:.5}, {:.5}), y = {:.5}, ‖F2‖∞ = {:.1e}",
            r.exit_status, r.num_outer_iterations, r.num_inner_iterations, r.solution[0], r.solution[1],
            r.lagrange_multipliers[0], r.f2_norm
        );
        guess = r.solution;
    }
    Ok(())
}
