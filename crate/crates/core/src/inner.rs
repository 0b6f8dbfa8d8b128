//! The inner-problem merit `ψ(u; c, y)` and its gradient.
//!
//! ```text
//! ψ(u; c, y)  = f(u) + (c/2)·[dist²_C(F1(u) + y/c) + ‖F2(u)‖²]
//! ∇ψ(u; c, y) = ∇f(u) + c·JF1(u)ᵀ·s(u) + (c/2)·∇‖F2(u)‖²
//! s(u)        = F1(u) + y/c − proj_C(F1(u) + y/c)
//! ```
//!
//! The slack `s(u)` is cached for the last point where it was computed; the
//! outer loop reads it back for the multiplier update `y⁺ = c·s(u)`.

use crate::error::{check_len, Error, OracleFailure, Result};
use crate::linalg::{all_finite, axpy, norm2_squared, norm_inf};
use crate::panoc::SmoothObjective;
use crate::problem::ProblemDefinition;

pub struct InnerOracle<'a> {
    problem: &'a ProblemDefinition,
    p: Vec<f64>,
    c: f64,
    y: Vec<f64>,
    shifted: Vec<f64>,
    work_n1: Vec<f64>,
    f2_val: Vec<f64>,
    work_n: Vec<f64>,
    slack: Vec<f64>,
    slack_at: Vec<f64>,
    slack_valid: bool,
}

impl<'a> InnerOracle<'a> {
    pub fn new(problem: &'a ProblemDefinition, p: &[f64], c: f64, y: &[f64]) -> Result<Self> {
        check_len("parameter", problem.n_p, p.len())?;
        check_len("multipliers", problem.n1, y.len())?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidConfig { field: "penalty", value: c, requirement: "must be > 0" });
        }
        Ok(InnerOracle {
            problem,
            p: p.to_vec(),
            c,
            y: y.to_vec(),
            shifted: vec![0.0; problem.n1],
            work_n1: vec![0.0; problem.n1],
            f2_val: vec![0.0; problem.n2],
            work_n: vec![0.0; problem.n],
            slack: vec![0.0; problem.n1],
            slack_at: vec![0.0; problem.n],
            slack_valid: false,
        })
    }

    pub fn problem(&self) -> &'a ProblemDefinition {
        self.problem
    }

    pub fn penalty(&self) -> f64 {
        self.c
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.y
    }

    pub fn parameter(&self) -> &[f64] {
        &self.p
    }

    pub fn set_penalty(&mut self, c: f64) {
        debug_assert!(c > 0.0);
        self.c = c;
        self.slack_valid = false;
    }

    pub fn set_multipliers(&mut self, y: &[f64]) {
        self.y.copy_from_slice(y);
        self.slack_valid = false;
    }

    pub fn set_parameter(&mut self, p: &[f64]) {
        self.p.copy_from_slice(p);
        self.slack_valid = false;
    }

    /// `ψ(u; c, y)`
    pub fn psi(&mut self, u: &[f64]) -> std::result::Result<f64, OracleFailure> {
        let problem = self.problem;
        let f = (problem.cost)(u, &self.p);
        if !f.is_finite() {
            return Err(OracleFailure("cost"));
        }
        let mut penalty_terms = 0.0;
        if problem.n1 > 0 {
            self.update_slack(u)?;
            penalty_terms += norm2_squared(&self.slack);
        }
        if problem.n2 > 0 {
            penalty_terms += self.eval_f2(u)?;
        }
        Ok(f + 0.5 * self.c * penalty_terms)
    }

    /// `∇ψ(u; c, y)` written into `grad`.
    pub fn grad_psi(&mut self, u: &[f64], grad: &mut [f64]) -> std::result::Result<(), OracleFailure> {
        let problem = self.problem;
        (problem.grad_cost)(u, &self.p, grad);
        if !all_finite(grad) {
            return Err(OracleFailure("grad_cost"));
        }
        if problem.n1 > 0 {
            self.update_slack(u)?;
            let jt = problem.jf1_t_apply.as_ref().expect("validated problem");
            self.work_n1
                .iter_mut()
                .zip(&self.slack)
                .for_each(|(w, s)| *w = self.c * s);
            jt(u, &self.p, &self.work_n1, &mut self.work_n);
            if !all_finite(&self.work_n) {
                return Err(OracleFailure("jf1_t_apply"));
            }
            axpy(1.0, &self.work_n, grad);
        }
        if problem.n2 > 0 {
            let g2 = problem.grad_f2_sq.as_ref().expect("validated problem");
            g2(u, &self.p, &mut self.work_n);
            if !all_finite(&self.work_n) {
                return Err(OracleFailure("grad_f2_sq"));
            }
            axpy(0.5 * self.c, &self.work_n, grad);
        }
        Ok(())
    }

    /// The slack `F1(u) + y/c − proj_C(F1(u) + y/c)` and its infinity norm.
    ///
    /// Reuses the cached value when `u` is the last point evaluated.
    pub fn infeasibility_f1(&mut self, u: &[f64]) -> std::result::Result<(&[f64], f64), OracleFailure> {
        assert!(self.problem.n1 > 0, "problem has no F1 constraints");
        self.update_slack(u)?;
        Ok((&self.slack, norm_inf(&self.slack)))
    }

    /// `‖F2(u)‖∞`, or 0 when there are no penalty constraints.
    pub fn f2_norm_inf(&mut self, u: &[f64]) -> std::result::Result<f64, OracleFailure> {
        if self.problem.n2 == 0 {
            return Ok(0.0);
        }
        self.eval_f2(u)?;
        Ok(norm_inf(&self.f2_val))
    }

    fn eval_f2(&mut self, u: &[f64]) -> std::result::Result<f64, OracleFailure> {
        let f2 = self.problem.f2.as_ref().expect("validated problem");
        f2(u, &self.p, &mut self.f2_val);
        if !all_finite(&self.f2_val) {
            return Err(OracleFailure("f2"));
        }
        Ok(norm2_squared(&self.f2_val))
    }

    fn update_slack(&mut self, u: &[f64]) -> std::result::Result<(), OracleFailure> {
        if self.slack_valid && self.slack_at == u {
            return Ok(());
        }
        let problem = self.problem;
        let f1 = problem.f1.as_ref().expect("validated problem");
        let set_c = problem.set_c.as_ref().expect("validated problem");
        f1(u, &self.p, &mut self.shifted);
        if !all_finite(&self.shifted) {
            self.slack_valid = false;
            return Err(OracleFailure("f1"));
        }
        let inv_c = 1.0 / self.c;
        self.shifted
            .iter_mut()
            .zip(&self.y)
            .for_each(|(s, yi)| *s += yi * inv_c);
        self.work_n1.copy_from_slice(&self.shifted);
        set_c.project_unchecked(&mut self.work_n1);
        self.slack
            .iter_mut()
            .zip(self.shifted.iter().zip(&self.work_n1))
            .for_each(|(s, (a, b))| *s = a - b);
        self.slack_at.copy_from_slice(u);
        self.slack_valid = true;
        Ok(())
    }
}

impl SmoothObjective for InnerOracle<'_> {
    fn dimension(&self) -> usize {
        self.problem.n
    }

    fn value(&mut self, u: &[f64]) -> std::result::Result<f64, OracleFailure> {
        self.psi(u)
    }

    fn gradient(&mut self, u: &[f64], grad: &mut [f64]) -> std::result::Result<(), OracleFailure> {
        self.grad_psi(u, grad)
    }
}
