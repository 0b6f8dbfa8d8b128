//! Using the PANOC inner solver directly on a smooth objective.
//!
//! Minimises the (nonconvex) Rosenbrock function over a box by implementing
//! [`SmoothObjective`] by hand, with iteration tracing enabled.
//!
//! ```text
//! cargo run --release --example panoc_inner
//! ```

use panalm::{ConstraintSet, OracleFailure, PanocSettings, PanocSolver, SmoothObjective};

struct Rosenbrock {
    evaluations: usize,
}

impl SmoothObjective for Rosenbrock {
    fn dimension(&self) -> usize {
        2
    }

    fn value(&mut self, u: &[f64]) -> Result<f64, OracleFailure> {
        self.evaluations += 1;
        Ok((1.0 - u[0]).powi(2) + 100.0 * (u[1] - u[0] * u[0]).powi(2))
    }

    fn gradient(&mut self, u: &[f64], g: &mut [f64]) -> Result<(), OracleFailure> {
        let d = u[1] - u[0] * u[0];
        g[0] = -2.0 * (1.0 - u[0]) - 400.0 * u[0] * d;
        g[1] = 200.0 * d;
        Ok(())
    }
}

fn main() {
    let set_u = ConstraintSet::rectangle(vec![-2.0, -2.0], vec![2.0, 0.5]).unwrap();
    let mut solver = PanocSolver::new(2, PanocSettings::default());
    solver.enable_trace();
    let mut oracle = Rosenbrock { evaluations: 0 };
    let mut u = [-1.5, 2.0];

    let sol = solver.solve(&mut oracle, &set_u, &mut u, 1e-8, 1000, None);
    println!("status       {:?}", sol.status);
    println!("iterations   {}", sol.iterations);
    println!("‖R_γ(u)‖∞    {:.2e}", sol.fpr_norm);
    println!("u            {u:?}");
    println!("f(u)         {:.10}", sol.psi);
    println!("f calls      {}", oracle.evaluations);

    let trace = solver.take_trace();
    let full_steps = trace.iter().filter(|s| s.tau == 1.0).count();
    println!("steps taking the full quasi-Newton direction: {full_steps}/{}", trace.len());
}
