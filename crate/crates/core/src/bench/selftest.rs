//! Quick invariant checks runnable from the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::inner::InnerOracle;
use crate::oracle::{fd_gradient, FdConfig};
use crate::problem::ProblemDefinition;
use crate::report::ExitStatus;
use crate::sets::ConstraintSet;

use super::{mhe, nmpc, rosenbrock, Encoding};

#[derive(Debug, Clone)]
pub struct SelftestOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> SelftestOutcome {
    SelftestOutcome { name: name.into(), passed, detail: detail.into() }
}

/// Largest relative disagreement between `∇ψ` and central differences of `ψ`
/// over `points` random points of the box `[-scale, scale]ⁿ`.
pub(crate) fn psi_gradient_error(problem: &ProblemDefinition, p: &[f64], scale: f64, points: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<f64> = (0..problem.n1).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut oracle = InnerOracle::new(problem, p, 10.0, &y).expect("valid oracle");
    let mut worst: f64 = 0.0;
    let mut g = vec![0.0; problem.n];
    for _ in 0..points {
        let u: Vec<f64> = (0..problem.n).map(|_| rng.gen_range(-scale..scale)).collect();
        oracle.grad_psi(&u, &mut g).expect("finite gradient");
        let fd = fd_gradient(|v| oracle.psi(v).unwrap_or(f64::NAN), &u, FdConfig::default()).expect("finite psi");
        let gnorm = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let err = g.iter().zip(&fd).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(err / gnorm.max(1.0));
    }
    worst
}

pub fn run_selftest() -> Vec<SelftestOutcome> {
    let mut out = Vec::new();

    // projections
    let ball = ConstraintSet::ball2(None, 1.0).unwrap();
    let proj = ball.projection(&[3.0, 4.0]).unwrap();
    out.push(outcome("ball projection", (proj[0] - 0.6).abs() < 1e-15 && (proj[1] - 0.8).abs() < 1e-15, format!("{proj:?}")));

    // gradients of every bench oracle
    let p = rosenbrock::DEFAULT_PARAMETER;
    for e in Encoding::ALL {
        let err = psi_gradient_error(&rosenbrock::problem(e), &p, 0.5, 10, 7);
        out.push(outcome(format!("rosenbrock-{e} gradient"), err <= 1e-5, format!("rel err {err:.2e}")));
    }
    let small = nmpc::NmpcProblem { horizon: 20, ..Default::default() };
    let p_nmpc = [-3.5, 0.1, 0.2, 0.5, 0.0, 0.0];
    for e in Encoding::ALL {
        let err = psi_gradient_error(&small.problem(e), &p_nmpc, 0.25, 5, 11);
        out.push(outcome(format!("nmpc-{e} gradient"), err <= 1e-5, format!("rel err {err:.2e}")));
    }
    let m = mhe::MheProblem::new(10);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let plant = mhe::simulate_plant(10, &mut rng, 1.0);
    let err = psi_gradient_error(&m.problem(), &plant.measurements, 1.0, 5, 13);
    out.push(outcome("mhe gradient", err <= 1e-5, format!("rel err {err:.2e}")));

    // reference solve
    for e in Encoding::ALL {
        let problem = rosenbrock::problem(e);
        let report = crate::alm::solve(&problem, &rosenbrock::config(), &p, &[0.0; 5], None);
        let (ok, detail) = match report {
            Ok(r) => (
                r.exit_status == ExitStatus::Converged,
                format!("{} outer={} inner={}", r.exit_status, r.num_outer_iterations, r.num_inner_iterations),
            ),
            Err(err) => (false, err.to_string()),
        };
        out.push(outcome(format!("rosenbrock-{e} solve"), ok, detail));
    }
    out
}
