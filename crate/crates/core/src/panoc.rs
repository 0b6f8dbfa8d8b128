//! PANOC: projected gradient steps blended with L-BFGS directions through a
//! linesearch on the forward-backward envelope.
//!
//! For a smooth `ψ` with `L`-Lipschitz gradient and a set `U` with a cheap
//! projection, each iteration computes
//!
//! ```text
//! u_half = proj_U(u − γ∇ψ(u)),   r = u − u_half
//! u⁺     = u − (1 − τ)·r + τ·d,  d = −H·r
//! ```
//!
//! where `τ ∈ {1, 1/2, 1/4, …}` is the first value giving sufficient decrease
//! of the envelope `φ_γ(u) = ψ(u) − ∇ψ(u)ᵀr + ‖r‖²/(2γ)`. The Lipschitz
//! estimate is doubled (and `γ`, `σ` halved) whenever the quadratic upper
//! bound fails at `u_half`.
//!
//! Termination is on `‖γ⁻¹r + ∇ψ(u_half) − ∇ψ(u)‖∞ < ε`, and the returned
//! point is always `u_half`, so it lies in `U`.

use std::time::Instant;

use crate::config::SolverConfig;
use crate::error::OracleFailure;
use crate::lbfgs::LbfgsBuffer;
use crate::linalg::{dot, norm2, norm2_squared};
use crate::sets::ConstraintSet;

/// Smallest Lipschitz estimate handed to the step-size rule.
pub const MIN_LIPSCHITZ_ESTIMATE: f64 = 1e-12;
/// Relative slack in the quadratic upper-bound test, absorbing rounding in `ψ`.
const LIPSCHITZ_TEST_RELATIVE_SLACK: f64 = 1e-12;
const MAX_LIPSCHITZ_DOUBLINGS: usize = 200;

/// A cost with gradient, as seen by the inner solver.
pub trait SmoothObjective {
    fn dimension(&self) -> usize;
    fn value(&mut self, u: &[f64]) -> Result<f64, OracleFailure>;
    fn gradient(&mut self, u: &[f64], grad: &mut [f64]) -> Result<(), OracleFailure>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanocSettings {
    pub lbfgs_memory: usize,
    pub alpha_gamma: f64,
    pub sigma_coeff: f64,
    pub max_linesearch_halvings: usize,
    pub cbfgs_epsilon: f64,
}

impl Default for PanocSettings {
    fn default() -> Self {
        PanocSettings::from(&SolverConfig::default())
    }
}

impl From<&SolverConfig> for PanocSettings {
    fn from(c: &SolverConfig) -> Self {
        PanocSettings {
            lbfgs_memory: c.lbfgs_memory,
            alpha_gamma: c.alpha_gamma,
            sigma_coeff: c.sigma_coeff,
            max_linesearch_halvings: c.max_linesearch_halvings,
            cbfgs_epsilon: c.cbfgs_epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerStatus {
    Converged,
    MaxIterations,
    TimeBudgetExceeded,
    OracleFailure(OracleFailure),
}

/// Result of [`PanocSolver::solve`]; the iterate itself is written back into `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSolution {
    pub status: InnerStatus,
    pub iterations: usize,
    pub fpr_norm: f64,
    pub psi: f64,
    pub gamma: f64,
    pub lipschitz: f64,
    /// Total `L` doublings over all backtracking loops.
    pub lipschitz_doublings: usize,
    /// Total linesearch trial points evaluated (each costs one `ψ` and one `∇ψ`).
    pub linesearch_trials: usize,
}

/// Per-iteration diagnostics, recorded when tracing is enabled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanocStep {
    pub gamma: f64,
    pub sigma: f64,
    pub lipschitz: f64,
    pub fbe_before: f64,
    pub fbe_after: f64,
    /// `σ‖γ⁻¹r‖²`, the decrease the linesearch demands.
    pub required_decrease: f64,
    pub tau: f64,
    pub tau_halvings: usize,
    pub lipschitz_doublings: usize,
    pub lbfgs_accepted: bool,
}

/// Reusable PANOC workspace. All vectors are allocated in [`PanocSolver::new`].
#[derive(Debug, Clone)]
pub struct PanocSolver {
    settings: PanocSettings,
    n: usize,
    u: Vec<f64>,
    grad: Vec<f64>,
    u_half: Vec<f64>,
    grad_half: Vec<f64>,
    r: Vec<f64>,
    d: Vec<f64>,
    u_plus: Vec<f64>,
    grad_plus: Vec<f64>,
    u_plus_half: Vec<f64>,
    r_plus: Vec<f64>,
    s_diff: Vec<f64>,
    y_diff: Vec<f64>,
    lbfgs: LbfgsBuffer,
    trace: Option<Vec<PanocStep>>,
}

impl PanocSolver {
    pub fn new(n: usize, settings: PanocSettings) -> Self {
        PanocSolver {
            settings,
            n,
            u: vec![0.0; n],
            grad: vec![0.0; n],
            u_half: vec![0.0; n],
            grad_half: vec![0.0; n],
            r: vec![0.0; n],
            d: vec![0.0; n],
            u_plus: vec![0.0; n],
            grad_plus: vec![0.0; n],
            u_plus_half: vec![0.0; n],
            r_plus: vec![0.0; n],
            s_diff: vec![0.0; n],
            y_diff: vec![0.0; n],
            lbfgs: LbfgsBuffer::new(n, settings.lbfgs_memory, settings.cbfgs_epsilon),
            trace: None,
        }
    }

    pub fn settings(&self) -> &PanocSettings {
        &self.settings
    }

    /// Starts recording a [`PanocStep`] per iteration.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    /// Returns and clears the recorded steps.
    pub fn take_trace(&mut self) -> Vec<PanocStep> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Minimizes `oracle` over `set_u` starting from `u`, overwriting `u` with the result.
    ///
    /// # Panics
    ///
    /// If `u` or the oracle dimension differ from the workspace size, or if
    /// `set_u` does not act on vectors of that size.
    pub fn solve<O: SmoothObjective>(
        &mut self,
        oracle: &mut O,
        set_u: &ConstraintSet,
        u: &mut [f64],
        tolerance: f64,
        max_iters: usize,
        deadline: Option<Instant>,
    ) -> InnerSolution {
        assert_eq!(u.len(), self.n, "initial guess length");
        assert_eq!(oracle.dimension(), self.n, "oracle dimension");
        set_u
            .check_dimension(self.n)
            .expect("set U must match the decision dimension");
        assert!(tolerance > 0.0, "tolerance must be positive");

        let mut out = InnerSolution {
            status: InnerStatus::Converged,
            iterations: 0,
            fpr_norm: f64::INFINITY,
            psi: f64::NAN,
            gamma: f64::NAN,
            lipschitz: f64::NAN,
            lipschitz_doublings: 0,
            linesearch_trials: 0,
        };
        match self.run(oracle, set_u, u, tolerance, max_iters, deadline, &mut out) {
            Ok(status) => out.status = status,
            Err(e) => out.status = InnerStatus::OracleFailure(e),
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn run<O: SmoothObjective>(
        &mut self,
        oracle: &mut O,
        set_u: &ConstraintSet,
        u0: &mut [f64],
        tolerance: f64,
        max_iters: usize,
        deadline: Option<Instant>,
        out: &mut InnerSolution,
    ) -> Result<InnerStatus, OracleFailure> {
        let settings = self.settings;
        self.u.copy_from_slice(u0);
        let mut psi = oracle.value(&self.u)?;
        oracle.gradient(&self.u, &mut self.grad)?;

        let mut lipschitz = lipschitz_from_gradient(
            oracle,
            &self.u,
            &self.grad,
            &mut self.u_plus,
            &mut self.grad_plus,
        )?;
        let mut gamma = settings.alpha_gamma / lipschitz;
        let mut sigma = settings.sigma_coeff * gamma * (1.0 - gamma * lipschitz);
        self.lbfgs.clear();

        fb_step(set_u, &self.u, &self.grad, gamma, &mut self.u_half, &mut self.r);
        let mut psi_half = oracle.value(&self.u_half);
        let mut iterations = 0;

        loop {
            out.iterations = iterations;
            out.psi = psi;
            out.gamma = gamma;
            out.lipschitz = lipschitz;

            // Backtrack on L until ψ(u_half) ≤ ψ(u) − ∇ψ(u)ᵀr + (L/2)‖r‖².
            let mut doublings = 0;
            let mut nonfinite_retry_used = false;
            let psi_half_value = loop {
                let bound = psi - dot(&self.grad, &self.r)
                    + 0.5 * lipschitz * norm2_squared(&self.r)
                    + LIPSCHITZ_TEST_RELATIVE_SLACK * psi.abs();
                match psi_half {
                    Ok(v) if v <= bound => match oracle.gradient(&self.u_half, &mut self.grad_half) {
                        Ok(()) => break v,
                        Err(e) if nonfinite_retry_used => return Err(e),
                        Err(_) => nonfinite_retry_used = true,
                    },
                    Ok(_) => {}
                    Err(e) if nonfinite_retry_used => return Err(e),
                    Err(_) => nonfinite_retry_used = true,
                }
                if doublings >= MAX_LIPSCHITZ_DOUBLINGS {
                    return Err(OracleFailure("lipschitz estimate diverged"));
                }
                doublings += 1;
                lipschitz *= 2.0;
                gamma /= 2.0;
                sigma /= 2.0;
                self.lbfgs.clear();
                fb_step(set_u, &self.u, &self.grad, gamma, &mut self.u_half, &mut self.r);
                psi_half = oracle.value(&self.u_half);
            };
            out.gamma = gamma;
            out.lipschitz = lipschitz;
            out.lipschitz_doublings += doublings;

            let inv_gamma = 1.0 / gamma;
            let fpr = self
                .r
                .iter()
                .zip(self.grad_half.iter().zip(&self.grad))
                .fold(0.0f64, |m, (ri, (gh, g))| m.max((ri * inv_gamma + gh - g).abs()));
            out.fpr_norm = fpr;

            let stop = if fpr < tolerance {
                Some(InnerStatus::Converged)
            } else if iterations >= max_iters {
                Some(InnerStatus::MaxIterations)
            } else if deadline.is_some_and(|t| Instant::now() >= t) {
                Some(InnerStatus::TimeBudgetExceeded)
            } else {
                None
            };
            if let Some(status) = stop {
                u0.copy_from_slice(&self.u_half);
                out.psi = psi_half_value;
                return Ok(status);
            }

            // Quasi-Newton direction and envelope linesearch.
            self.lbfgs.apply(&self.r, &mut self.d);
            let r_norm_sq = norm2_squared(&self.r);
            let fbe_u = psi - dot(&self.grad, &self.r) + 0.5 * inv_gamma * r_norm_sq;
            let required = sigma * r_norm_sq * inv_gamma * inv_gamma;
            let target = fbe_u - required;

            let mut tau = 1.0;
            let mut halvings = 0;
            let mut accepted: Option<(f64, f64)> = None;
            while halvings < settings.max_linesearch_halvings {
                for i in 0..self.n {
                    self.u_plus[i] = self.u[i] - (1.0 - tau) * self.r[i] + tau * self.d[i];
                }
                out.linesearch_trials += 1;
                if let Some(v) = self.trial(oracle, set_u, gamma) {
                    let (psi_plus, fbe_plus) = v;
                    if fbe_plus <= target {
                        accepted = Some((psi_plus, fbe_plus));
                        break;
                    }
                }
                tau *= 0.5;
                halvings += 1;
            }
            let (psi_plus, fbe_plus) = match accepted {
                Some(v) => v,
                None => {
                    // τ = 0: the forward-backward point, with its gradient already known.
                    tau = 0.0;
                    self.u_plus.copy_from_slice(&self.u_half);
                    self.grad_plus.copy_from_slice(&self.grad_half);
                    fb_step(set_u, &self.u_plus, &self.grad_plus, gamma, &mut self.u_plus_half, &mut self.r_plus);
                    let fbe = psi_half_value - dot(&self.grad_plus, &self.r_plus)
                        + 0.5 * inv_gamma * norm2_squared(&self.r_plus);
                    (psi_half_value, fbe)
                }
            };

            for i in 0..self.n {
                self.s_diff[i] = self.u_plus[i] - self.u[i];
                self.y_diff[i] = self.r_plus[i] - self.r[i];
            }
            let lbfgs_accepted = self
                .lbfgs
                .update(&self.s_diff, &self.y_diff, norm2(&self.r) * inv_gamma);

            if let Some(trace) = self.trace.as_mut() {
                trace.push(PanocStep {
                    gamma,
                    sigma,
                    lipschitz,
                    fbe_before: fbe_u,
                    fbe_after: fbe_plus,
                    required_decrease: required,
                    tau,
                    tau_halvings: halvings,
                    lipschitz_doublings: doublings,
                    lbfgs_accepted,
                });
            }

            std::mem::swap(&mut self.u, &mut self.u_plus);
            std::mem::swap(&mut self.grad, &mut self.grad_plus);
            std::mem::swap(&mut self.u_half, &mut self.u_plus_half);
            std::mem::swap(&mut self.r, &mut self.r_plus);
            psi = psi_plus;
            psi_half = oracle.value(&self.u_half);
            iterations += 1;
        }
    }

    /// Evaluates `ψ`, `∇ψ` and the envelope at `u_plus`; `None` if any value is non-finite.
    fn trial<O: SmoothObjective>(&mut self, oracle: &mut O, set_u: &ConstraintSet, gamma: f64) -> Option<(f64, f64)> {
        let psi_plus = oracle.value(&self.u_plus).ok()?;
        oracle.gradient(&self.u_plus, &mut self.grad_plus).ok()?;
        fb_step(set_u, &self.u_plus, &self.grad_plus, gamma, &mut self.u_plus_half, &mut self.r_plus);
        let fbe = psi_plus - dot(&self.grad_plus, &self.r_plus) + 0.5 / gamma * norm2_squared(&self.r_plus);
        fbe.is_finite().then_some((psi_plus, fbe))
    }
}

/// `u_half = proj_U(u − γ·grad)` and `r = u − u_half`.
fn fb_step(set_u: &ConstraintSet, u: &[f64], grad: &[f64], gamma: f64, u_half: &mut [f64], r: &mut [f64]) {
    for i in 0..u.len() {
        u_half[i] = u[i] - gamma * grad[i];
    }
    set_u.project_unchecked(u_half);
    for i in 0..u.len() {
        r[i] = u[i] - u_half[i];
    }
}

fn lipschitz_from_gradient<O: SmoothObjective>(
    oracle: &mut O,
    u: &[f64],
    grad: &[f64],
    u_shift: &mut [f64],
    grad_shift: &mut [f64],
) -> Result<f64, OracleFailure> {
    let mut h_norm_sq = 0.0;
    for i in 0..u.len() {
        let h = 1e-6 * u[i].abs().max(1.0);
        u_shift[i] = u[i] + h;
        h_norm_sq += h * h;
    }
    oracle.gradient(u_shift, grad_shift)?;
    let diff_sq: f64 = grad_shift.iter().zip(grad).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((diff_sq / h_norm_sq).sqrt().max(MIN_LIPSCHITZ_ESTIMATE))
}

/// `‖∇ψ(u0 + h) − ∇ψ(u0)‖ / ‖h‖` with `hᵢ = 1e-6·max(1, |u0ᵢ|)`, floored at
/// [`MIN_LIPSCHITZ_ESTIMATE`].
pub fn estimate_lipschitz<O: SmoothObjective>(oracle: &mut O, u0: &[f64]) -> Result<f64, OracleFailure> {
    let n = u0.len();
    let mut grad = vec![0.0; n];
    oracle.gradient(u0, &mut grad)?;
    let mut u_shift = vec![0.0; n];
    let mut grad_shift = vec![0.0; n];
    lipschitz_from_gradient(oracle, u0, &grad, &mut u_shift, &mut grad_shift)
}

/// The projected-gradient point `T_γ(u) = proj_U(u − γ∇ψ(u))`.
pub fn forward_backward<O: SmoothObjective>(
    oracle: &mut O,
    set_u: &ConstraintSet,
    u: &[f64],
    gamma: f64,
) -> Result<Vec<f64>, OracleFailure> {
    let mut grad = vec![0.0; u.len()];
    oracle.gradient(u, &mut grad)?;
    let mut u_half = vec![0.0; u.len()];
    let mut r = vec![0.0; u.len()];
    set_u.check_dimension(u.len()).expect("set U must match the decision dimension");
    fb_step(set_u, u, &grad, gamma, &mut u_half, &mut r);
    Ok(u_half)
}

/// The forward-backward envelope
/// `φ_γ(u) = ψ(u) − (γ/2)‖∇ψ(u)‖² + (1/2γ)·dist²_U(u − γ∇ψ(u))`.
pub fn fbe<O: SmoothObjective>(
    oracle: &mut O,
    set_u: &ConstraintSet,
    u: &[f64],
    gamma: f64,
) -> Result<f64, OracleFailure> {
    let psi = oracle.value(u)?;
    let mut grad = vec![0.0; u.len()];
    oracle.gradient(u, &mut grad)?;
    let step: Vec<f64> = u.iter().zip(&grad).map(|(ui, gi)| ui - gamma * gi).collect();
    let dist_sq = set_u
        .squared_distance(&step)
        .expect("set U must match the decision dimension");
    Ok(psi - 0.5 * gamma * norm2_squared(&grad) + 0.5 / gamma * dist_sq)
}
