//! Numerical checking helpers: finite-difference gradients, brute-force grid
//! minimisation over small boxes, and call-counting oracle wrappers.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::problem::ProblemDefinition;

/// Central finite differences with step `step·max(1, |uᵢ|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    pub step: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig { step: 1e-6 }
    }
}

pub fn fd_gradient<F>(mut func: F, u: &[f64], cfg: FdConfig) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(cfg.step > 0.0 && cfg.step.is_finite()) {
        return Err(Error::InvalidConfig { field: "step", value: cfg.step, requirement: "must be > 0" });
    }
    let mut x = u.to_vec();
    let mut grad = vec![0.0; u.len()];
    for i in 0..u.len() {
        let h = cfg.step * u[i].abs().max(1.0);
        x[i] = u[i] + h;
        let fp = func(&x);
        x[i] = u[i] - h;
        let fm = func(&x);
        x[i] = u[i];
        if !(fp.is_finite() && fm.is_finite()) {
            return Err(Error::NonFiniteOutput("fd_gradient"));
        }
        grad[i] = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

/// Exhaustive search over a uniform grid on `[lower, upper]` (at most three
/// dimensions). Ties keep the first point in lexicographic order, with the
/// first coordinate varying slowest.
pub fn grid_minimize<F>(mut func: F, lower: &[f64], upper: &[f64], points_per_dim: usize) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = lower.len();
    crate::error::check_len("grid upper bound", dim, upper.len())?;
    if dim > 3 {
        return Err(Error::DimensionTooLarge(dim));
    }
    if lower.iter().zip(upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u)) {
        return Err(Error::InvalidSet("grid box must be bounded with lower ≤ upper".into()));
    }
    if points_per_dim < 2 {
        return Err(Error::InvalidConfig {
            field: "points_per_dim",
            value: points_per_dim as f64,
            requirement: "must be ≥ 2",
        });
    }
    let total = points_per_dim.pow(dim as u32);
    let mut x = vec![0.0; dim];
    let mut best = (lower.to_vec(), f64::INFINITY);
    for idx in 0..total {
        let mut rem = idx;
        for d in (0..dim).rev() {
            let k = rem % points_per_dim;
            rem /= points_per_dim;
            let t = k as f64 / (points_per_dim - 1) as f64;
            x[d] = lower[d] + t * (upper[d] - lower[d]);
        }
        let v = func(&x);
        if v < best.1 {
            best = (x.clone(), v);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::NonFiniteOutput("grid_minimize"));
    }
    Ok(best)
}

/// Per-oracle call counts, shared with the wrapped problem.
#[derive(Debug, Default)]
pub struct OracleCounters {
    pub cost: AtomicUsize,
    pub grad_cost: AtomicUsize,
    pub f1: AtomicUsize,
    pub jf1_t_apply: AtomicUsize,
    pub f2: AtomicUsize,
    pub grad_f2_sq: AtomicUsize,
}

/// Plain snapshot of [`OracleCounters`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CallCounts {
    pub cost: usize,
    pub grad_cost: usize,
    pub f1: usize,
    pub jf1_t_apply: usize,
    pub f2: usize,
    pub grad_f2_sq: usize,
}

impl OracleCounters {
    pub fn snapshot(&self) -> CallCounts {
        CallCounts {
            cost: self.cost.load(Ordering::Relaxed),
            grad_cost: self.grad_cost.load(Ordering::Relaxed),
            f1: self.f1.load(Ordering::Relaxed),
            jf1_t_apply: self.jf1_t_apply.load(Ordering::Relaxed),
            f2: self.f2.load(Ordering::Relaxed),
            grad_f2_sq: self.grad_f2_sq.load(Ordering::Relaxed),
        }
    }

    pub fn reset(&self) {
        for c in [&self.cost, &self.grad_cost, &self.f1, &self.jf1_t_apply, &self.f2, &self.grad_f2_sq] {
            c.store(0, Ordering::Relaxed);
        }
    }
}

impl std::ops::Sub for CallCounts {
    type Output = CallCounts;
    fn sub(self, o: CallCounts) -> CallCounts {
        CallCounts {
            cost: self.cost - o.cost,
            grad_cost: self.grad_cost - o.grad_cost,
            f1: self.f1 - o.f1,
            jf1_t_apply: self.jf1_t_apply - o.jf1_t_apply,
            f2: self.f2 - o.f2,
            grad_f2_sq: self.grad_f2_sq - o.grad_f2_sq,
        }
    }
}

/// Returns a copy of `problem` whose oracles bump the returned counters.
pub fn counting_wrapper(problem: &ProblemDefinition) -> (ProblemDefinition, Arc<OracleCounters>) {
    let counters = Arc::new(OracleCounters::default());
    let mut wrapped = problem.clone();

    let (k, inner) = (counters.clone(), problem.cost.clone());
    wrapped.cost = Arc::new(move |u, p| {
        k.cost.fetch_add(1, Ordering::Relaxed);
        inner(u, p)
    });
    let (k, inner) = (counters.clone(), problem.grad_cost.clone());
    wrapped.grad_cost = Arc::new(move |u, p, g| {
        k.grad_cost.fetch_add(1, Ordering::Relaxed);
        inner(u, p, g)
    });
    if let Some(inner) = problem.f1.clone() {
        let k = counters.clone();
        wrapped.f1 = Some(Arc::new(move |u, p, out| {
            k.f1.fetch_add(1, Ordering::Relaxed);
            inner(u, p, out)
        }));
    }
    if let Some(inner) = problem.jf1_t_apply.clone() {
        let k = counters.clone();
        wrapped.jf1_t_apply = Some(Arc::new(move |u, p, w, out| {
            k.jf1_t_apply.fetch_add(1, Ordering::Relaxed);
            inner(u, p, w, out)
        }));
    }
    if let Some(inner) = problem.f2.clone() {
        let k = counters.clone();
        wrapped.f2 = Some(Arc::new(move |u, p, out| {
            k.f2.fetch_add(1, Ordering::Relaxed);
            inner(u, p, out)
        }));
    }
    if let Some(inner) = problem.grad_f2_sq.clone() {
        let k = counters.clone();
        wrapped.grad_f2_sq = Some(Arc::new(move |u, p, out| {
            k.grad_f2_sq.fetch_add(1, Ordering::Relaxed);
            inner(u, p, out)
        }));
    }
    (wrapped, counters)
}
