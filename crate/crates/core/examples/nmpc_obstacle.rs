//! Closed-loop obstacle avoidance for a kinematic bicycle.
//!
//! Runs the receding-horizon controller under both constraint encodings and
//! writes each trajectory to `target/nmpc_<encoding>.csv`.
//!
//! ```text
//! cargo run --release --example nmpc_obstacle [steps]
//! ```

use panalm::bench::nmpc::{run_nmpc_closed_loop, NmpcProblem, INITIAL_STATE};
use panalm::bench::Encoding;
use panalm::ExitStatus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps = std::env::args().nth(1).map_or(Ok(300), |s| s.parse())?;
    let nmpc = NmpcProblem::default();
    let r2 = nmpc.obstacle.radius.powi(2);
    for encoding in Encoding::ALL {
        let result = run_nmpc_closed_loop(&nmpc, encoding, steps, INITIAL_STATE)?;
        let converged = result.steps.iter().filter(|s| s.exit_status == Some(ExitStatus::Converged)).count();
        println!("{encoding}:");
        println!("  converged solves        {converged}/{steps}");
        println!("  min distance² / r²      {:.4}", result.min_obstacle_distance_sq / r2);
        println!("  final ‖(px, py, ψ)‖     {:.4}", result.final_pose_error);
        println!("  solve time median/max   {:.2} / {:.2} ms", result.median_solve_ms, result.max_solve_ms);
        let path = format!("target/nmpc_{encoding}.csv");
        std::fs::write(&path, result.to_csv())?;
        println!("  trajectory written to   {path}");
    }
    Ok(())
}
