//! Reference problems with hand-derived gradients, closed-loop drivers and
//! result serialisation.
//!
//! * [`rosenbrock`]: a five-variable constrained Rosenbrock problem.
//! * [`nmpc`]: obstacle avoidance for a kinematic bicycle by single shooting.
//! * [`mhe`]: moving-horizon estimation of the Lorenz system.

pub mod mhe;
pub mod nmpc;
pub mod rosenbrock;
mod selftest;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::problem::ProblemDefinition;

pub use selftest::{run_selftest, SelftestOutcome};

/// How the nonsmooth / inequality constraints of a benchmark are handed to
/// the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    /// Quadratic penalty on `F2`.
    Penalty,
    /// Augmented Lagrangian on `F1 ∈ C`.
    Alm,
}

impl Encoding {
    pub const ALL: [Encoding; 2] = [Encoding::Penalty, Encoding::Alm];

    pub fn as_str(self) -> &'static str {
        match self {
            Encoding::Penalty => "penalty",
            Encoding::Alm => "alm",
        }
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Encoding {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "penalty" => Ok(Encoding::Penalty),
            "alm" => Ok(Encoding::Alm),
            other => Err(format!("unknown encoding `{other}` (expected `penalty` or `alm`)")),
        }
    }
}

/// Problems that can be served over TCP, by identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchProblemId {
    Rosenbrock(Encoding),
    Nmpc(Encoding),
    Mhe(usize),
}

impl BenchProblemId {
    pub const NAMES: &'static [&'static str] = &[
        "rosenbrock-alm",
        "rosenbrock-penalty",
        "nmpc-alm",
        "nmpc-penalty",
        "mhe-50",
        "mhe-100",
        "mhe-150",
    ];

    pub fn problem(self) -> ProblemDefinition {
        match self {
            BenchProblemId::Rosenbrock(e) => rosenbrock::problem(e),
            BenchProblemId::Nmpc(e) => nmpc::NmpcProblem::default().problem(e),
            BenchProblemId::Mhe(n) => mhe::MheProblem::new(n).problem(),
        }
    }

    pub fn config(self) -> crate::SolverConfig {
        match self {
            BenchProblemId::Rosenbrock(_) => rosenbrock::config(),
            BenchProblemId::Nmpc(_) => nmpc::config(),
            BenchProblemId::Mhe(_) => mhe::config(),
        }
    }
}

impl fmt::Display for BenchProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchProblemId::Rosenbrock(e) => write!(f, "rosenbrock-{e}"),
            BenchProblemId::Nmpc(e) => write!(f, "nmpc-{e}"),
            BenchProblemId::Mhe(n) => write!(f, "mhe-{n}"),
        }
    }
}

impl FromStr for BenchProblemId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let err = || format!("unknown problem `{s}`; available: {}", Self::NAMES.join(", "));
        let (kind, arg) = s.split_once('-').ok_or_else(err)?;
        match kind {
            "rosenbrock" => Ok(BenchProblemId::Rosenbrock(arg.parse().map_err(|_| err())?)),
            "nmpc" => Ok(BenchProblemId::Nmpc(arg.parse().map_err(|_| err())?)),
            "mhe" => match arg.parse::<usize>() {
                Ok(n @ (50 | 100 | 150)) => Ok(BenchProblemId::Mhe(n)),
                _ => Err(err()),
            },
            _ => Err(err()),
        }
    }
}

/// Median of a non-empty slice (average of the middle pair for even length).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
