//! Nonconvex parametric optimisation with PANOC and an augmented
//! Lagrangian / penalty outer loop.
//!
//! Problems have the form
//!
//! ```text
//! minimise   f(u, p)
//! subject to u ∈ U,  F1(u, p) ∈ C,  F2(u, p) = 0
//! ```
//!
//! where `f` is smooth, `U` admits a cheap projection, `C` is convex and
//! `‖F2‖²` is continuously differentiable. Gradients are supplied by the
//! caller. See the `examples/` directory for end-to-end usage.
//!
//! ```
//! use panalm::{ConstraintSet, ProblemDefinition, SolverConfig, AlmSolver};
//!
//! // min (u - 2)²  s.t.  u ∈ [-1, 1]
//! let problem = ProblemDefinition::new(
//!     1, 0,
//!     |u, _| (u[0] - 2.0).powi(2),
//!     |u, _, g| g[0] = 2.0 * (u[0] - 2.0),
//!     ConstraintSet::rectangle(vec![-1.0], vec![1.0]).unwrap(),
//! );
//! let mut solver = AlmSolver::new(&problem, SolverConfig::default()).unwrap();
//! let report = solver.solve(&[], &[0.0], None).unwrap();
//! assert!(report.is_converged());
//! assert!((report.solution[0] - 1.0).abs() < 1e-6);
//! ```

mod error;
mod linalg;

pub mod alm;
pub mod bench;
pub mod config;
pub mod inner;
pub mod lbfgs;
pub mod oracle;
pub mod panoc;
pub mod problem;
pub mod report;
pub mod server;
pub mod sets;

pub use alm::{AlmSolver, OuterStep};
pub use config::{PenaltyRule, SolverConfig};
pub use error::{Error, OracleFailure, Result};
pub use inner::InnerOracle;
pub use lbfgs::LbfgsBuffer;
pub use panoc::{InnerSolution, InnerStatus, PanocSettings, PanocSolver, SmoothObjective};
pub use problem::{validate_problem, ProblemDefinition};
pub use report::{ExitStatus, SolverReport};
pub use sets::ConstraintSet;
