//! Constrained Rosenbrock in five variables.
//!
//! ```text
//! min  Σ_{i<4} p₂(u_{i+1} − u_i²)² + (p₁ − u_i)²
//! s.t. ‖u‖ ≤ 0.73
//!      p₃ sin u₀ − cos(u₁ + u₂) = 0
//!      u₂ + u₃ ≤ 0.2
//! ```

use crate::config::SolverConfig;
use crate::problem::ProblemDefinition;
use crate::sets::ConstraintSet;

use super::Encoding;

pub const N: usize = 5;
pub const NP: usize = 3;
pub const BALL_RADIUS: f64 = 0.73;
/// The parameter used throughout the examples and tests.
pub const DEFAULT_PARAMETER: [f64; 3] = [1.0, 50.0, 1.5];

pub fn cost(u: &[f64], p: &[f64]) -> f64 {
    (0..4)
        .map(|i| p[1] * (u[i + 1] - u[i] * u[i]).powi(2) + (p[0] - u[i]).powi(2))
        .sum()
}

pub fn grad_cost(u: &[f64], p: &[f64], g: &mut [f64]) {
    g.fill(0.0);
    for i in 0..4 {
        let d = u[i + 1] - u[i] * u[i];
        g[i] += -4.0 * p[1] * d * u[i] - 2.0 * (p[0] - u[i]);
        g[i + 1] += 2.0 * p[1] * d;
    }
}

fn equality(u: &[f64], p: &[f64]) -> f64 {
    p[2] * u[0].sin() - (u[1] + u[2]).cos()
}

fn inequality(u: &[f64]) -> f64 {
    u[2] + u[3] - 0.2
}

/// `out = w₀·∇h₁ + w₁·∇h₂`
fn constraint_jt(u: &[f64], p: &[f64], w: &[f64], out: &mut [f64]) {
    let s = (u[1] + u[2]).sin();
    out[0] = w[0] * p[2] * u[0].cos();
    out[1] = w[0] * s;
    out[2] = w[0] * s + w[1];
    out[3] = w[1];
    out[4] = 0.0;
}

pub fn problem(encoding: Encoding) -> ProblemDefinition {
    let set_u = ConstraintSet::ball2(None, BALL_RADIUS).expect("valid radius");
    let base = ProblemDefinition::new(N, NP, cost, grad_cost, set_u);
    match encoding {
        Encoding::Alm => {
            let set_c = ConstraintSet::rectangle(vec![0.0, f64::NEG_INFINITY], vec![0.0, 0.0]).expect("valid box");
            base.with_aug_lagrangian_constraints(
                2,
                |u, p, out| {
                    out[0] = equality(u, p);
                    out[1] = inequality(u);
                },
                constraint_jt,
                set_c,
            )
        }
        Encoding::Penalty => base.with_penalty_constraints(
            2,
            |u, p, out| {
                out[0] = equality(u, p);
                out[1] = inequality(u).max(0.0);
            },
            |u, p, out| {
                let w = [2.0 * equality(u, p), 2.0 * inequality(u).max(0.0)];
                constraint_jt(u, p, &w, out);
            },
        ),
    }
}

/// Tolerances and penalty schedule of the reference experiment.
pub fn config() -> SolverConfig {
    SolverConfig::builder()
        .epsilon(1e-5)
        .delta(1e-4)
        .epsilon0(1e-4)
        .c0(1e3)
        .rho(5.0)
        .build()
        .expect("valid config")
}
