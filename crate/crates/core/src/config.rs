//! Solver configuration.

use std::time::Duration;

use crate::error::{Error, Result};

/// How the outer loop reads the two infeasibility-decrease conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PenaltyRule {
    /// Increase `c` only when every present measure failed to decrease by `θ`.
    #[default]
    IncreaseIfAllStalled,
    /// Increase `c` when any present measure failed to decrease by `θ`.
    IncreaseIfAnyStalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub epsilon0: f64,
    pub beta: f64,
    pub rho: f64,
    pub theta: f64,
    pub c0: f64,
    pub y0: Option<Vec<f64>>,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub max_duration: Option<Duration>,
    pub lbfgs_memory: usize,
    pub alpha_gamma: f64,
    pub sigma_coeff: f64,
    pub max_linesearch_halvings: usize,
    pub cbfgs_epsilon: f64,
    pub penalty_rule: PenaltyRule,
}

impl SolverConfig {
    pub fn builder() -> SolverConfigBuilder {
        SolverConfigBuilder::default()
    }

    /// Re-checks every range constraint.
    pub fn validate(&self) -> Result<()> {
        positive("epsilon", self.epsilon)?;
        positive("delta", self.delta)?;
        if !(self.epsilon0 >= self.epsilon && self.epsilon0.is_finite()) {
            return Err(invalid("epsilon0", self.epsilon0, "must be finite and >= epsilon"));
        }
        open_unit("beta", self.beta)?;
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return Err(invalid("rho", self.rho, "must be > 1"));
        }
        open_unit("theta", self.theta)?;
        positive("c0", self.c0)?;
        if let Some(y0) = &self.y0 {
            if !y0.iter().all(|v| v.is_finite()) {
                return Err(invalid("y0", f64::NAN, "entries must be finite"));
            }
        }
        if self.max_outer_iters == 0 {
            return Err(invalid("max_outer_iters", 0.0, "must be >= 1"));
        }
        if self.max_inner_iters == 0 {
            return Err(invalid("max_inner_iters", 0.0, "must be >= 1"));
        }
        if self.lbfgs_memory == 0 {
            return Err(invalid("lbfgs_memory", 0.0, "must be >= 1"));
        }
        open_unit("alpha_gamma", self.alpha_gamma)?;
        if !(self.sigma_coeff > 0.0 && self.sigma_coeff < 0.5) {
            return Err(invalid("sigma_coeff", self.sigma_coeff, "must lie in (0, 0.5)"));
        }
        if !(self.cbfgs_epsilon >= 0.0 && self.cbfgs_epsilon.is_finite()) {
            return Err(invalid("cbfgs_epsilon", self.cbfgs_epsilon, "must be finite and >= 0"));
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::builder().build().expect("default configuration is valid")
    }
}

/// Builder for [`SolverConfig`]; `build` rejects out-of-range values.
#[derive(Debug, Clone)]
pub struct SolverConfigBuilder {
    epsilon: f64,
    delta: f64,
    epsilon0: Option<f64>,
    beta: f64,
    rho: f64,
    theta: f64,
    c0: f64,
    y0: Option<Vec<f64>>,
    max_outer_iters: usize,
    max_inner_iters: usize,
    max_duration: Option<Duration>,
    lbfgs_memory: usize,
    alpha_gamma: f64,
    sigma_coeff: f64,
    max_linesearch_halvings: usize,
    cbfgs_epsilon: f64,
    penalty_rule: PenaltyRule,
}

impl Default for SolverConfigBuilder {
    fn default() -> Self {
        SolverConfigBuilder {
            epsilon: 1e-5,
            delta: 1e-4,
            epsilon0: None,
            beta: 0.1,
            rho: 5.0,
            theta: 0.25,
            c0: 10.0,
            y0: None,
            max_outer_iters: 50,
            max_inner_iters: 5000,
            max_duration: None,
            lbfgs_memory: 10,
            alpha_gamma: 0.95,
            sigma_coeff: 0.49,
            max_linesearch_halvings: 10,
            cbfgs_epsilon: 1e-10,
            penalty_rule: PenaltyRule::default(),
        }
    }
}

macro_rules! setter {
    ($name:ident, $ty:ty) => {
        pub fn $name(mut self, value: $ty) -> Self {
            self.$name = value;
            self
        }
    };
}

impl SolverConfigBuilder {
    setter!(epsilon, f64);
    setter!(delta, f64);
    setter!(beta, f64);
    setter!(rho, f64);
    setter!(theta, f64);
    setter!(c0, f64);
    setter!(max_outer_iters, usize);
    setter!(max_inner_iters, usize);
    setter!(lbfgs_memory, usize);
    setter!(alpha_gamma, f64);
    setter!(sigma_coeff, f64);
    setter!(max_linesearch_halvings, usize);
    setter!(cbfgs_epsilon, f64);
    setter!(penalty_rule, PenaltyRule);

    /// Initial inner tolerance; defaults to `max(epsilon, 1e-4)`.
    pub fn epsilon0(mut self, value: f64) -> Self {
        self.epsilon0 = Some(value);
        self
    }

    pub fn y0(mut self, value: Vec<f64>) -> Self {
        self.y0 = Some(value);
        self
    }

    pub fn max_duration(mut self, value: Duration) -> Self {
        self.max_duration = Some(value);
        self
    }

    pub fn build(self) -> Result<SolverConfig> {
        let config = SolverConfig {
            epsilon: self.epsilon,
            delta: self.delta,
            epsilon0: self.epsilon0.unwrap_or(self.epsilon.max(1e-4)),
            beta: self.beta,
            rho: self.rho,
            theta: self.theta,
            c0: self.c0,
            y0: self.y0,
            max_outer_iters: self.max_outer_iters,
            max_inner_iters: self.max_inner_iters,
            max_duration: self.max_duration,
            lbfgs_memory: self.lbfgs_memory,
            alpha_gamma: self.alpha_gamma,
            sigma_coeff: self.sigma_coeff,
            max_linesearch_halvings: self.max_linesearch_halvings,
            cbfgs_epsilon: self.cbfgs_epsilon,
            penalty_rule: self.penalty_rule,
        };
        config.validate()?;
        Ok(config)
    }
}

fn invalid(field: &'static str, value: f64, requirement: &'static str) -> Error {
    Error::InvalidConfig { field, value, requirement }
}

fn positive(field: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, value, "must be finite and > 0"))
    }
}

fn open_unit(field: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(invalid(field, value, "must lie in (0, 1)"))
    }
}
