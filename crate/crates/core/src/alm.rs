//! Outer loop: augmented Lagrangian updates for `F1(u) ∈ C` combined with a
//! quadratic penalty for `F2(u) = 0`.
//!
//! Each outer iteration projects the multipliers onto the compact box `Y`,
//! solves the inner problem `min_{u ∈ U} ψ(u; c, ȳ)` with PANOC (warm started
//! from the previous iterate), updates the multipliers, and then either
//! terminates, or grows the penalty `c` when the infeasibility stalled. The
//! inner tolerance shrinks geometrically from `epsilon0` to `epsilon`.

use std::time::{Duration, Instant};

use crate::config::{PenaltyRule, SolverConfig};
use crate::error::{check_len, OracleFailure, Result};
use crate::inner::InnerOracle;
use crate::linalg::dist_inf;
use crate::panoc::{InnerSolution, InnerStatus, PanocSettings, PanocSolver, PanocStep};
use crate::problem::ProblemDefinition;
use crate::report::{ExitStatus, SolverReport};
use crate::sets::{default_y_set, ConstraintSet};

/// Diagnostics of one outer iteration, recorded when tracing is enabled.
#[derive(Debug, Clone)]
pub struct OuterStep {
    pub iteration: usize,
    pub penalty: f64,
    pub inner_tolerance: f64,
    pub y_bar: Vec<f64>,
    pub inner_start: Vec<f64>,
    pub inner_end: Vec<f64>,
    pub inner: InnerSolution,
    pub z: f64,
    pub t: f64,
    pub penalty_increased: bool,
    pub panoc_steps: Vec<PanocStep>,
}

/// Warm-startable ALM/penalty solver bound to one problem.
pub struct AlmSolver<'a> {
    problem: &'a ProblemDefinition,
    config: SolverConfig,
    set_y: Option<ConstraintSet>,
    panoc: PanocSolver,
    trace: Option<Vec<OuterStep>>,
    last_report: Option<SolverReport>,
}

impl<'a> AlmSolver<'a> {
    pub fn new(problem: &'a ProblemDefinition, config: SolverConfig) -> Result<Self> {
        problem.validate()?;
        config.validate()?;
        if let Some(y0) = &config.y0 {
            check_len("y0", problem.n1, y0.len())?;
        }
        let set_y = match (&problem.set_y, &problem.set_c) {
            _ if problem.n1 == 0 => None,
            (Some(y), _) => Some(y.clone()),
            (None, Some(c)) => Some(default_y_set(c, problem.n1)?),
            (None, None) => unreachable!("validated problem has C when n1 > 0"),
        };
        let panoc = PanocSolver::new(problem.n, PanocSettings::from(&config));
        Ok(AlmSolver { problem, config, set_y, panoc, trace: None, last_report: None })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn problem(&self) -> &'a ProblemDefinition {
        self.problem
    }

    /// The multiplier box in use (given or defaulted).
    pub fn multiplier_set(&self) -> Option<&ConstraintSet> {
        self.set_y.as_ref()
    }

    pub fn last_report(&self) -> Option<&SolverReport> {
        self.last_report.as_ref()
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
        self.panoc.enable_trace();
    }

    pub fn take_trace(&mut self) -> Vec<OuterStep> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Solves with the configured initial penalty. `y0` falls back to the
    /// configured `y0`, then to zero.
    pub fn solve(&mut self, p: &[f64], u0: &[f64], y0: Option<&[f64]>) -> Result<SolverReport> {
        let c0 = self.config.c0;
        self.solve_with_penalty(p, u0, y0, c0)
    }

    /// As [`AlmSolver::solve`] with an explicit initial penalty.
    pub fn solve_with_penalty(
        &mut self,
        p: &[f64],
        u0: &[f64],
        y0: Option<&[f64]>,
        c0: f64,
    ) -> Result<SolverReport> {
        let problem = self.problem;
        check_len("parameter", problem.n_p, p.len())?;
        check_len("initial guess", problem.n, u0.len())?;
        if let Some(y0) = y0 {
            check_len("initial multipliers", problem.n1, y0.len())?;
        }
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(crate::Error::InvalidConfig {
                field: "initial penalty",
                value: c0,
                requirement: "must be finite and > 0",
            });
        }
        let report = self.run(p, u0, y0, c0)?;
        self.last_report = Some(report.clone());
        Ok(report)
    }

    fn run(&mut self, p: &[f64], u0: &[f64], y0: Option<&[f64]>, c0: f64) -> Result<SolverReport> {
        let start = Instant::now();
        let cfg = &self.config;
        let problem = self.problem;
        let deadline = cfg.max_duration.map(|d| start + d);
        let n1 = problem.n1;

        let mut u = u0.to_vec();
        let mut y = match (y0, &cfg.y0) {
            (Some(v), _) => v.to_vec(),
            (None, Some(v)) => v.clone(),
            (None, None) => vec![0.0; n1],
        };
        let mut y_bar = vec![0.0; n1];
        let mut y_plus = vec![0.0; n1];
        let mut c = c0;
        let mut eps_bar = cfg.epsilon0;
        let mut z_prev = f64::INFINITY;
        let mut t_prev = f64::INFINITY;
        let mut total_inner = 0;
        let mut oracle = InnerOracle::new(problem, p, c, &y_bar)?;

        let mut report = SolverReport {
            exit_status: ExitStatus::MaxOuterIterations,
            num_outer_iterations: 0,
            num_inner_iterations: 0,
            last_fpr_norm: f64::INFINITY,
            delta_y_norm: f64::INFINITY,
            f2_norm: f64::INFINITY,
            penalty: c,
            inner_tolerance: eps_bar,
            cost: f64::NAN,
            solution: u.clone(),
            lagrange_multipliers: y.clone(),
            solve_time: Duration::ZERO,
        };

        for nu in 0..cfg.max_outer_iters {
            y_bar.copy_from_slice(&y);
            if let Some(set_y) = &self.set_y {
                set_y.project_unchecked(&mut y_bar);
            }
            oracle.set_penalty(c);
            oracle.set_multipliers(&y_bar);

            let inner_start = self.trace.is_some().then(|| u.clone());
            let inner = self.panoc.solve(&mut oracle, &problem.set_u, &mut u, eps_bar, cfg.max_inner_iters, deadline);
            total_inner += inner.iterations;
            report.num_outer_iterations = nu + 1;
            report.num_inner_iterations = total_inner;
            report.last_fpr_norm = inner.fpr_norm;
            report.penalty = c;
            report.inner_tolerance = eps_bar;
            report.solution.copy_from_slice(&u);

            if let InnerStatus::OracleFailure(_) = inner.status {
                report.exit_status = ExitStatus::OracleFailure;
                break;
            }

            let measures = self.infeasibility(&mut oracle, &u, c, &y_bar, &mut y_plus);
            let (z, t) = match measures {
                Ok(v) => v,
                Err(_) => {
                    report.exit_status = ExitStatus::OracleFailure;
                    break;
                }
            };
            report.delta_y_norm = z;
            report.f2_norm = t;
            report.lagrange_multipliers.copy_from_slice(&y_plus);

            let converged = inner.status == InnerStatus::Converged
                && z <= c * cfg.delta
                && t <= cfg.delta
                && eps_bar <= cfg.epsilon;
            let mut increased = false;
            if !converged && inner.status != InnerStatus::TimeBudgetExceeded {
                let z_pair = (n1 > 0).then_some((z, z_prev));
                let t_pair = (problem.n2 > 0).then_some((t, t_prev));
                increased = penalty_decision(z_pair, t_pair, cfg.theta, nu, cfg.penalty_rule);
            }

            if let Some(trace) = self.trace.as_mut() {
                trace.push(OuterStep {
                    iteration: nu,
                    penalty: c,
                    inner_tolerance: eps_bar,
                    y_bar: y_bar.clone(),
                    inner_start: inner_start.unwrap_or_default(),
                    inner_end: u.clone(),
                    inner,
                    z,
                    t,
                    penalty_increased: increased,
                    panoc_steps: self.panoc.take_trace(),
                });
            }

            if converged {
                report.exit_status = ExitStatus::Converged;
                break;
            }
            if inner.status == InnerStatus::TimeBudgetExceeded
                || deadline.is_some_and(|d| Instant::now() >= d)
            {
                report.exit_status = ExitStatus::TimeBudgetExceeded;
                break;
            }
            report.exit_status = if inner.status == InnerStatus::MaxIterations {
                ExitStatus::MaxInnerIterations
            } else {
                ExitStatus::MaxOuterIterations
            };

            if increased {
                c *= cfg.rho;
            }
            eps_bar = cfg.epsilon.max(cfg.beta * eps_bar);
            y.copy_from_slice(&y_plus);
            z_prev = z;
            t_prev = t;
        }

        report.cost = (problem.cost)(&report.solution, p);
        report.solve_time = start.elapsed();
        Ok(report)
    }

    /// Computes `y⁺ = c·s(u)` into `y_plus` and returns `(z, t)`.
    fn infeasibility(
        &self,
        oracle: &mut InnerOracle<'_>,
        u: &[f64],
        c: f64,
        y_bar: &[f64],
        y_plus: &mut [f64],
    ) -> std::result::Result<(f64, f64), OracleFailure> {
        let mut z = 0.0;
        if self.problem.n1 > 0 {
            let (slack, _) = oracle.infeasibility_f1(u)?;
            y_plus.iter_mut().zip(slack).for_each(|(yp, s)| *yp = c * s);
            z = dist_inf(y_plus, y_bar);
        }
        let t = oracle.f2_norm_inf(u)?;
        Ok((z, t))
    }
}

/// One-shot solve; see [`AlmSolver`].
pub fn solve(
    problem: &ProblemDefinition,
    config: &SolverConfig,
    p: &[f64],
    u0: &[f64],
    y0: Option<&[f64]>,
) -> Result<SolverReport> {
    AlmSolver::new(problem, config.clone())?.solve(p, u0, y0)
}

/// `ȳ + c·(F1(u) − proj_C(F1(u) + ȳ/c))`
pub fn multiplier_update(y_bar: &[f64], c: f64, f1_val: &[f64], set_c: &ConstraintSet) -> Result<Vec<f64>> {
    check_len("multipliers", f1_val.len(), y_bar.len())?;
    let mut proj: Vec<f64> = f1_val.iter().zip(y_bar).map(|(f, y)| f + y / c).collect();
    set_c.project(&mut proj)?;
    Ok(y_bar
        .iter()
        .zip(f1_val.iter().zip(&proj))
        .map(|(y, (f, pr))| y + c * (f - pr))
        .collect())
}

/// Whether to grow the penalty after outer iteration `nu`.
///
/// `z` and `t` are `(current, previous)` infeasibility pairs, `None` when the
/// problem has no constraints of that kind; absent measures do not vote. A
/// measure has stalled when `current > θ·previous`. Never increases at `nu = 0`.
pub fn penalty_decision(
    z: Option<(f64, f64)>,
    t: Option<(f64, f64)>,
    theta: f64,
    nu: usize,
    rule: PenaltyRule,
) -> bool {
    if nu == 0 {
        return false;
    }
    let stalled = [z, t]
        .into_iter()
        .flatten()
        .map(|(current, previous)| current > theta * previous);
    let mut stalled = stalled.peekable();
    if stalled.peek().is_none() {
        return false;
    }
    match rule {
        PenaltyRule::IncreaseIfAllStalled => stalled.all(|s| s),
        PenaltyRule::IncreaseIfAnyStalled => stalled.any(|s| s),
    }
}
