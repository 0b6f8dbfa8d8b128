use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitStatus {
    Converged,
    MaxOuterIterations,
    MaxInnerIterations,
    TimeBudgetExceeded,
    OracleFailure,
}

impl ExitStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ExitStatus::Converged => "Converged",
            ExitStatus::MaxOuterIterations => "MaxOuterIterations",
            ExitStatus::MaxInnerIterations => "MaxInnerIterations",
            ExitStatus::TimeBudgetExceeded => "TimeBudgetExceeded",
            ExitStatus::OracleFailure => "OracleFailure",
        }
    }
}

impl fmt::Display for ExitStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

/// Outcome of an outer (ALM/penalty) solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub exit_status: ExitStatus,
    pub num_outer_iterations: usize,
    /// PANOC iterations summed over all outer iterations.
    pub num_inner_iterations: usize,
    /// `‖γ⁻¹r + ∇ψ(u_half) − ∇ψ(u)‖∞` of the last inner solve.
    pub last_fpr_norm: f64,
    /// `z = ‖y⁺ − ȳ‖∞`
    pub delta_y_norm: f64,
    /// `t = ‖F2(u)‖∞`
    pub f2_norm: f64,
    pub penalty: f64,
    /// Inner tolerance used by the last inner solve.
    pub inner_tolerance: f64,
    pub cost: f64,
    pub solution: Vec<f64>,
    pub lagrange_multipliers: Vec<f64>,
    pub solve_time: Duration,
}

impl SolverReport {
    pub fn is_converged(&self) -> bool {
        self.exit_status == ExitStatus::Converged
    }
}
