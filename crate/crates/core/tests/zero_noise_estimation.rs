//! Estimation from exact measurements of an undisturbed plant. Zero
//! disturbances are feasible and optimal, so the estimate should recover them.

use panalm::bench::mhe;
use panalm::ExitStatus;

#[test]
fn mhe_noiseless_recovers_zero_disturbances() {
    let horizon = 50;
    let m = mhe::MheProblem::new(horizon);
    let config = mhe::config();
    let (record, _, u) = mhe::run_trial(&m, 0, 1, 0.0).unwrap();
    assert_eq!(record.exit_status, ExitStatus::Converged);
    assert!(record.max_residual <= config.delta, "residual {:e}", record.max_residual);
    let disturbances = &u[3 * (horizon + 1)..];
    let worst = disturbances.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    assert!(worst <= config.delta, "max |ŵ|, |v̂| = {worst:e} > δ = {:e}", config.delta);
}
