//! Problem definition: user oracles, constraint sets and dimensions.
//!
//! A problem has the form
//!
//! ```text
//! minimize_{u ∈ U}  f(u, p)
//! subject to        F1(u, p) ∈ C      (augmented Lagrangian)
//!                   F2(u, p) = 0      (quadratic penalty)
//! ```
//!
//! Oracles write into caller-provided buffers so that the solver hot loop does
//! not allocate.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sets::ConstraintSet;

/// `f(u, p)`
pub type CostFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
/// Vector-valued oracle `(u, p, out)`; used for `∇f`, `F1`, `F2` and `∇‖F2‖²`.
pub type VectorFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(u, p, w, out)` computing `JF1(u, p)ᵀ w`.
pub type JacobianTransposeFn = Arc<dyn Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub struct ProblemDefinition {
    pub n: usize,
    pub n_p: usize,
    pub n1: usize,
    pub n2: usize,
    pub cost: CostFn,
    pub grad_cost: VectorFn,
    pub f1: Option<VectorFn>,
    pub jf1_t_apply: Option<JacobianTransposeFn>,
    pub f2: Option<VectorFn>,
    /// Gradient of the plain squared norm `‖F2(u, p)‖²` (no `c/2` factor).
    pub grad_f2_sq: Option<VectorFn>,
    pub set_u: ConstraintSet,
    pub set_c: Option<ConstraintSet>,
    pub set_y: Option<ConstraintSet>,
}

impl fmt::Debug for ProblemDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemDefinition")
            .field("n", &self.n)
            .field("n_p", &self.n_p)
            .field("n1", &self.n1)
            .field("n2", &self.n2)
            .field("set_u", &self.set_u)
            .field("set_c", &self.set_c)
            .field("set_y", &self.set_y)
            .finish_non_exhaustive()
    }
}

impl ProblemDefinition {
    /// A problem with only a cost and the simple set `U`.
    pub fn new<F, G>(n: usize, n_p: usize, cost: F, grad_cost: G, set_u: ConstraintSet) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        ProblemDefinition {
            n,
            n_p,
            n1: 0,
            n2: 0,
            cost: Arc::new(cost),
            grad_cost: Arc::new(grad_cost),
            f1: None,
            jf1_t_apply: None,
            f2: None,
            grad_f2_sq: None,
            set_u,
            set_c: None,
            set_y: None,
        }
    }

    /// Adds constraints `F1(u, p) ∈ C` handled by the augmented Lagrangian method.
    pub fn with_aug_lagrangian_constraints<F, J>(
        mut self,
        n1: usize,
        f1: F,
        jf1_t_apply: J,
        set_c: ConstraintSet,
    ) -> Self
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
        J: Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.n1 = n1;
        self.f1 = Some(Arc::new(f1));
        self.jf1_t_apply = Some(Arc::new(jf1_t_apply));
        self.set_c = Some(set_c);
        self
    }

    /// Overrides the default multiplier box `Y`.
    pub fn with_multiplier_set(mut self, set_y: ConstraintSet) -> Self {
        self.set_y = Some(set_y);
        self
    }

    /// Adds constraints `F2(u, p) = 0` handled by the penalty method.
    pub fn with_penalty_constraints<F, G>(mut self, n2: usize, f2: F, grad_f2_sq: G) -> Self
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
        G: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.n2 = n2;
        self.f2 = Some(Arc::new(f2));
        self.grad_f2_sq = Some(Arc::new(grad_f2_sq));
        self
    }

    pub fn has_alm_constraints(&self) -> bool {
        self.n1 > 0
    }

    pub fn has_penalty_constraints(&self) -> bool {
        self.n2 > 0
    }

    /// Checks structural invariants and probes every oracle at `u = 0`, `p = 0`.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::DimensionMismatch { what: "decision variable", expected: 1, found: 0 });
        }
        let alm_parts = [self.f1.is_some(), self.jf1_t_apply.is_some(), self.set_c.is_some()];
        if self.n1 > 0 {
            if self.f1.is_none() {
                return Err(Error::MissingOracle("f1"));
            }
            if self.jf1_t_apply.is_none() {
                return Err(Error::MissingOracle("jf1_t_apply"));
            }
            if self.set_c.is_none() {
                return Err(Error::MissingOracle("set_c"));
            }
        } else if alm_parts.iter().any(|&b| b) {
            return Err(Error::DimensionMismatch { what: "n1 (F1 supplied)", expected: 1, found: 0 });
        }
        if self.n2 > 0 {
            if self.f2.is_none() {
                return Err(Error::MissingOracle("f2"));
            }
            if self.grad_f2_sq.is_none() {
                return Err(Error::MissingOracle("grad_f2_sq"));
            }
        } else if self.f2.is_some() || self.grad_f2_sq.is_some() {
            return Err(Error::DimensionMismatch { what: "n2 (F2 supplied)", expected: 1, found: 0 });
        }

        self.set_u.check_dimension(self.n)?;
        if let Some(c) = &self.set_c {
            c.check_dimension(self.n1)?;
            if !c.is_convex() {
                return Err(Error::InvalidSet("set C must be convex".into()));
            }
        }
        if let Some(y) = &self.set_y {
            y.check_dimension(self.n1)?;
        }

        let u = vec![0.0; self.n];
        let p = vec![0.0; self.n_p];
        if !(self.cost)(&u, &p).is_finite() {
            return Err(Error::NonFiniteOutput("cost"));
        }
        probe("grad_cost", self.n, |out| (self.grad_cost)(&u, &p, out))?;
        if let (Some(f1), Some(jt)) = (&self.f1, &self.jf1_t_apply) {
            probe("f1", self.n1, |out| f1(&u, &p, out))?;
            let w = vec![1.0; self.n1];
            probe("jf1_t_apply", self.n, |out| jt(&u, &p, &w, out))?;
        }
        if let (Some(f2), Some(g2)) = (&self.f2, &self.grad_f2_sq) {
            probe("f2", self.n2, |out| f2(&u, &p, out))?;
            probe("grad_f2_sq", self.n, |out| g2(&u, &p, out))?;
        }
        Ok(())
    }
}

/// Runs a vector oracle into a NaN-poisoned buffer of the declared length.
///
/// An oracle that produces a different length panics on the slice write
/// (`copy_from_slice`, indexing). The panic is caught and the actual length is
/// recovered by retrying with other buffer sizes.
fn probe(what: &'static str, len: usize, run: impl Fn(&mut [f64])) -> Result<()> {
    let attempt = |size: usize| {
        let mut buf = vec![f64::NAN; size];
        std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(&mut buf))).map(|_| buf)
    };
    match attempt(len) {
        Ok(buf) if buf.iter().all(|v| v.is_finite()) => Ok(()),
        Ok(_) => Err(Error::NonFiniteOutput(what)),
        Err(_) => {
            let found = (0..=2 * len + 2)
                .filter(|&s| s != len)
                .find(|&s| attempt(s).is_ok())
                .unwrap_or(0);
            Err(Error::DimensionMismatch { what, expected: len, found })
        }
    }
}

/// Free-function form of [`ProblemDefinition::validate`].
pub fn validate_problem(problem: &ProblemDefinition) -> Result<()> {
    problem.validate()
}
