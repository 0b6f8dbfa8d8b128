//! Moving-horizon estimation of the Lorenz system.
//!
//! Simulates noisy plant runs, estimates the state trajectory for each, and
//! prints per-trial iteration counts, penalty growth and estimation error.
//!
//! ```text
//! cargo run --release --example mhe_lorenz [horizon] [trials]
//! ```

use panalm::bench::mhe::{run_mhe, DEFAULT_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let horizon: usize = args.next().map_or(Ok(100), |s| s.parse())?;
    let trials: usize = args.next().map_or(Ok(10), |s| s.parse())?;

    let result = run_mhe(horizon, trials, DEFAULT_SEED)?;
    println!("trial  status     outer  inner   penalty     max|x̂−x|  time[ms]");
    for t in &result.trials {
        println!(
            "{:>5}  {:<9}  {:>5}  {:>5}  {:>10.1}  {:>9.3}  {:>8.1}",
            t.trial, t.exit_status, t.outer_iterations, t.inner_iterations, t.final_penalty, t.max_state_error, t.solve_time_ms
        );
    }
    println!(
        "max outer = {}, max penalty = {:.1}, median inner = {}, median time = {:.1} ms",
        result.max_outer_iterations, result.max_final_penalty, result.median_inner_iterations, result.median_solve_ms
    );
    Ok(())
}
