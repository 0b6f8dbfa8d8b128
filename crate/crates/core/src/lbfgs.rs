//! Limited-memory BFGS with cautious (Li–Fukushima) pair acceptance.
//!
//! The buffer stores up to `memory` pairs `(s, ỹ)` in a ring and applies the
//! inverse-Hessian estimate through the two-loop recursion, with initial
//! scaling `H₀ = (⟨s, ỹ⟩ / ⟨ỹ, ỹ⟩)·I` taken from the newest pair. Storage is
//! allocated once at construction.

use crate::linalg::{axpy, dot, norm2_squared};

#[derive(Debug, Clone)]
pub struct LbfgsBuffer {
    n: usize,
    memory: usize,
    s: Vec<f64>,
    y: Vec<f64>,
    rho: Vec<f64>,
    alpha: Vec<f64>,
    /// Slot of the newest pair.
    head: usize,
    count: usize,
    gamma_scale: f64,
    cbfgs_epsilon: f64,
}

impl LbfgsBuffer {
    /// # Panics
    ///
    /// If `n` or `memory` is zero.
    pub fn new(n: usize, memory: usize, cbfgs_epsilon: f64) -> Self {
        assert!(n > 0, "problem size must be positive");
        assert!(memory > 0, "L-BFGS memory must be positive");
        LbfgsBuffer {
            n,
            memory,
            s: vec![0.0; n * memory],
            y: vec![0.0; n * memory],
            rho: vec![0.0; memory],
            alpha: vec![0.0; memory],
            head: 0,
            count: 0,
            gamma_scale: 1.0,
            cbfgs_epsilon,
        }
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn gamma_scale(&self) -> f64 {
        self.gamma_scale
    }

    /// Offers the pair `(s, y_res)`; returns whether it was stored.
    ///
    /// A pair is accepted iff `⟨s, ỹ⟩ > 0` and
    /// `⟨s, ỹ⟩ / ‖s‖² ≥ cbfgs_epsilon · grad_norm`. When the buffer is full
    /// the oldest pair is evicted.
    pub fn update(&mut self, s: &[f64], y_res: &[f64], grad_norm: f64) -> bool {
        assert_eq!(s.len(), self.n);
        assert_eq!(y_res.len(), self.n);
        let sy = dot(s, y_res);
        let ss = norm2_squared(s);
        let yy = norm2_squared(y_res);
        if !(ss > 0.0 && sy > 0.0 && yy > 0.0 && sy.is_finite() && yy.is_finite()) {
            return false;
        }
        if sy / ss < self.cbfgs_epsilon * grad_norm {
            return false;
        }
        let slot = if self.count == 0 { 0 } else { (self.head + 1) % self.memory };
        let range = slot * self.n..(slot + 1) * self.n;
        self.s[range.clone()].copy_from_slice(s);
        self.y[range].copy_from_slice(y_res);
        self.rho[slot] = 1.0 / sy;
        self.head = slot;
        self.count = (self.count + 1).min(self.memory);
        self.gamma_scale = sy / yy;
        true
    }

    /// Writes `d = −H·r` into `d`.
    pub fn apply(&mut self, r: &[f64], d: &mut [f64]) {
        assert_eq!(r.len(), self.n);
        assert_eq!(d.len(), self.n);
        d.copy_from_slice(r);
        if self.count > 0 {
            let n = self.n;
            // newest to oldest
            for k in 0..self.count {
                let slot = self.slot(k);
                let s = &self.s[slot * n..(slot + 1) * n];
                let y = &self.y[slot * n..(slot + 1) * n];
                let a = self.rho[slot] * dot(s, d);
                self.alpha[slot] = a;
                axpy(-a, y, d);
            }
            d.iter_mut().for_each(|v| *v *= self.gamma_scale);
            // oldest to newest
            for k in (0..self.count).rev() {
                let slot = self.slot(k);
                let s = &self.s[slot * n..(slot + 1) * n];
                let y = &self.y[slot * n..(slot + 1) * n];
                let b = self.rho[slot] * dot(y, d);
                axpy(self.alpha[slot] - b, s, d);
            }
        }
        d.iter_mut().for_each(|v| *v = -*v);
    }

    /// Drops all stored pairs; capacity is kept.
    pub fn clear(&mut self) {
        self.count = 0;
        self.head = 0;
        self.gamma_scale = 1.0;
    }

    /// Ring slot of the `k`-th newest pair.
    fn slot(&self, k: usize) -> usize {
        (self.head + self.memory - k) % self.memory
    }
}
