//! Constrained Rosenbrock solved with both constraint encodings.
//!
//! The equality and inequality constraints are handled first by the
//! augmented Lagrangian (`F1 ∈ C`) and then as a quadratic penalty
//! (`F2 = 0`, with `[·]₊` on the inequality).
//!
//! ```text
//! cargo run --release --example rosenbrock_alm
//! ```

use panalm::bench::{rosenbrock, Encoding};
use panalm::AlmSolver;

fn main() -> Result<(), panalm::Error> {
    let p = rosenbrock::DEFAULT_PARAMETER;
    let mut solutions = Vec::new();
    for encoding in [Encoding::Alm, Encoding::Penalty] {
        let problem = rosenbrock::problem(encoding);
        let mut solver = AlmSolver::new(&problem, rosenbrock::config())?;
        let report = solver.solve(&p, &[0.0; 5], None)?;
        println!("{encoding:>8}: {}", report.exit_status);
        println!("  outer / inner iterations  {} / {}", report.num_outer_iterations, report.num_inner_iterations);
        println!("  cost                      {:.6}", report.cost);
        println!("  ‖Δy‖∞, ‖F2‖∞              {:.2e}, {:.2e}", report.delta_y_norm, report.f2_norm);
        println!("  penalty                   {}", report.penalty);
        println!("  multipliers               {:?}", report.lagrange_multipliers);
        println!("  solution                  {:?}", report.solution);
        println!("  time                      {:?}", report.solve_time);
        solutions.push(report.solution);
    }
    let gap = solutions[0].iter().zip(&solutions[1]).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    println!("max |u_alm − u_penalty| = {gap:.2e}");
    Ok(())
}
