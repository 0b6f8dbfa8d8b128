//! Moving-horizon estimation for the Lorenz system.
//!
//! The plant is `x_{t+1} = Φ(x_t) + w_t`, `y_t = G(x_t) + v_t` with `Φ` one
//! RK4 step of the Lorenz equations and `G(x) = (2x₁, x₂ + x₃)`. Given the
//! measurements `y₀..y_N` as parameter, the estimator solves
//!
//! ```text
//! min  Σ_{t<N} ‖ŵ_t‖² + ‖v̂_t‖²
//! s.t. ŵ_t ∈ [−1, 1]³, v̂_t ∈ [−1.5, 1.5]²
//!      x̂_{t+1} − Φ(x̂_t) − ŵ_t = 0          t = 0..N−1
//!      y_t − G(x̂_t) − v̂_t = 0               t = 0..N
//! ```
//!
//! over `u = (x̂₀..x̂_N, ŵ₀..ŵ_N, v̂₀..v̂_N)`, with both equality blocks handled
//! by the augmented Lagrangian (`C = {0}`).

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::alm::AlmSolver;
use crate::config::SolverConfig;
use crate::error::Result;
use crate::linalg::norm_inf;
use crate::problem::ProblemDefinition;
use crate::report::ExitStatus;
use crate::sets::ConstraintSet;

use super::median;

pub const A1: f64 = 10.0;
pub const A2: f64 = 14.0;
pub const A3: f64 = 8.0 / 3.0;
pub const STEP: f64 = 0.1;
pub const W_BOUND: f64 = 1.0;
pub const V_BOUND: f64 = 1.5;

type Mat3 = [[f64; 3]; 3];

fn lorenz(x: &[f64; 3]) -> [f64; 3] {
    [A1 * (x[1] - x[0]), x[0] * (A2 - x[2]) - x[1], x[0] * x[1] - A3 * x[2]]
}

fn lorenz_jacobian(x: &[f64; 3]) -> Mat3 {
    [[-A1, A1, 0.0], [A2 - x[2], -1.0, -x[0]], [x[1], x[0], -A3]]
}

fn offset(x: &[f64; 3], k: &[f64; 3], s: f64) -> [f64; 3] {
    [x[0] + s * k[0], x[1] + s * k[1], x[2] + s * k[2]]
}

fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

/// `I + s·K`
fn shifted_identity(k: &Mat3, s: f64) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = s * k[i][j] + if i == j { 1.0 } else { 0.0 };
        }
    }
    m
}

/// One RK4 step of length [`STEP`].
pub fn rk4(x: &[f64; 3]) -> [f64; 3] {
    let h = STEP;
    let k1 = lorenz(x);
    let k2 = lorenz(&offset(x, &k1, h / 2.0));
    let k3 = lorenz(&offset(x, &k2, h / 2.0));
    let k4 = lorenz(&offset(x, &k3, h));
    std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// `∂Φ/∂x` of [`rk4`].
pub fn rk4_jacobian(x: &[f64; 3]) -> Mat3 {
    let h = STEP;
    let k1 = lorenz(x);
    let x2 = offset(x, &k1, h / 2.0);
    let k2 = lorenz(&x2);
    let x3 = offset(x, &k2, h / 2.0);
    let k3 = lorenz(&x3);
    let x4 = offset(x, &k3, h);

    let d1 = lorenz_jacobian(x);
    let d2 = matmul(&lorenz_jacobian(&x2), &shifted_identity(&d1, h / 2.0));
    let d3 = matmul(&lorenz_jacobian(&x3), &shifted_identity(&d2, h / 2.0));
    let d4 = matmul(&lorenz_jacobian(&x4), &shifted_identity(&d3, h));
    let mut j = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let id = if r == c { 1.0 } else { 0.0 };
            j[r][c] = id + h / 6.0 * (d1[r][c] + 2.0 * d2[r][c] + 2.0 * d3[r][c] + d4[r][c]);
        }
    }
    j
}

pub fn output(x: &[f64]) -> [f64; 2] {
    [2.0 * x[0], x[1] + x[2]]
}

/// Estimation problem for a window of `horizon` transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MheProblem {
    pub horizon: usize,
}

impl MheProblem {
    pub fn new(horizon: usize) -> Self {
        assert!(horizon >= 1, "horizon must be positive");
        MheProblem { horizon }
    }

    /// Decision dimension `8(N + 1)`.
    pub fn n(&self) -> usize {
        8 * (self.horizon + 1)
    }

    /// Number of equality rows `3N + 2(N + 1)`.
    pub fn n1(&self) -> usize {
        3 * self.horizon + 2 * (self.horizon + 1)
    }

    /// Parameter length: the stacked measurements.
    pub fn np(&self) -> usize {
        2 * (self.horizon + 1)
    }

    fn w_offset(&self) -> usize {
        3 * (self.horizon + 1)
    }

    fn v_offset(&self) -> usize {
        6 * (self.horizon + 1)
    }

    pub fn states<'u>(&self, u: &'u [f64]) -> &'u [f64] {
        &u[..self.w_offset()]
    }

    pub fn cost(&self, u: &[f64]) -> f64 {
        let (wo, vo, n) = (self.w_offset(), self.v_offset(), self.horizon);
        let w: f64 = u[wo..wo + 3 * n].iter().map(|v| v * v).sum();
        let v: f64 = u[vo..vo + 2 * n].iter().map(|v| v * v).sum();
        w + v
    }

    pub fn grad_cost(&self, u: &[f64], g: &mut [f64]) {
        let (wo, vo, n) = (self.w_offset(), self.v_offset(), self.horizon);
        g.fill(0.0);
        for i in (wo..wo + 3 * n).chain(vo..vo + 2 * n) {
            g[i] = 2.0 * u[i];
        }
    }

    pub fn residuals(&self, u: &[f64], y: &[f64], out: &mut [f64]) {
        let (wo, vo, n) = (self.w_offset(), self.v_offset(), self.horizon);
        for t in 0..n {
            let x: [f64; 3] = u[3 * t..3 * t + 3].try_into().unwrap();
            let phi = rk4(&x);
            for i in 0..3 {
                out[3 * t + i] = u[3 * (t + 1) + i] - phi[i] - u[wo + 3 * t + i];
            }
        }
        let base = 3 * n;
        for t in 0..=n {
            let g = output(&u[3 * t..3 * t + 3]);
            for i in 0..2 {
                out[base + 2 * t + i] = y[2 * t + i] - g[i] - u[vo + 2 * t + i];
            }
        }
    }

    /// `out = JF1(u)ᵀ·w`
    pub fn residuals_jt(&self, u: &[f64], w: &[f64], out: &mut [f64]) {
        let (wo, vo, n) = (self.w_offset(), self.v_offset(), self.horizon);
        out.fill(0.0);
        for t in 0..n {
            let x: [f64; 3] = u[3 * t..3 * t + 3].try_into().unwrap();
            let j = rk4_jacobian(&x);
            let wt = &w[3 * t..3 * t + 3];
            for i in 0..3 {
                out[3 * (t + 1) + i] += wt[i];
                out[3 * t + i] -= (0..3).map(|r| j[r][i] * wt[r]).sum::<f64>();
                out[wo + 3 * t + i] -= wt[i];
            }
        }
        let base = 3 * n;
        for t in 0..=n {
            let (e0, e1) = (w[base + 2 * t], w[base + 2 * t + 1]);
            out[3 * t] -= 2.0 * e0;
            out[3 * t + 1] -= e1;
            out[3 * t + 2] -= e1;
            out[vo + 2 * t] -= e0;
            out[vo + 2 * t + 1] -= e1;
        }
    }

    pub fn decision_set(&self) -> ConstraintSet {
        let k = self.horizon + 1;
        let mut lo = vec![f64::NEG_INFINITY; 3 * k];
        let mut hi = vec![f64::INFINITY; 3 * k];
        lo.extend(std::iter::repeat_n(-W_BOUND, 3 * k));
        hi.extend(std::iter::repeat_n(W_BOUND, 3 * k));
        lo.extend(std::iter::repeat_n(-V_BOUND, 2 * k));
        hi.extend(std::iter::repeat_n(V_BOUND, 2 * k));
        ConstraintSet::rectangle(lo, hi).expect("valid bounds")
    }

    pub fn problem(&self) -> ProblemDefinition {
        let me = Arc::new(*self);
        let (m1, m2, m3, m4) = (me.clone(), me.clone(), me.clone(), me);
        ProblemDefinition::new(
            self.n(),
            self.np(),
            move |u, _| m1.cost(u),
            move |u, _, g| m2.grad_cost(u, g),
            self.decision_set(),
        )
        .with_aug_lagrangian_constraints(
            self.n1(),
            move |u, y, out| m3.residuals(u, y, out),
            move |u, _, w, out| m4.residuals_jt(u, w, out),
            ConstraintSet::Zero,
        )
    }
}

/// Tuning of the estimation study.
pub fn config() -> SolverConfig {
    SolverConfig::builder()
        .c0(200.0)
        .rho(1.8)
        .epsilon0(0.1)
        .lbfgs_memory(15)
        .delta(1e-5)
        .epsilon(1e-4)
        .build()
        .expect("valid config")
}

/// One simulated plant run: true states and measurements.
#[derive(Debug, Clone)]
pub struct PlantData {
    pub states: Vec<[f64; 3]>,
    pub measurements: Vec<f64>,
}

/// Simulates `horizon` plant transitions with uniform process and
/// measurement noise (scaled by `noise`, 0 for a noiseless plant).
pub fn simulate_plant(horizon: usize, rng: &mut impl Rng, noise: f64) -> PlantData {
    let mut x: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-5.0..5.0));
    x[2] += 10.0;
    let mut states = Vec::with_capacity(horizon + 1);
    let mut measurements = Vec::with_capacity(2 * (horizon + 1));
    for t in 0..=horizon {
        states.push(x);
        let g = output(&x);
        for gi in g {
            measurements.push(gi + noise * rng.gen_range(-V_BOUND..=V_BOUND));
        }
        if t < horizon {
            let phi = rk4(&x);
            x = std::array::from_fn(|i| phi[i] + noise * rng.gen_range(-W_BOUND..=W_BOUND));
        }
    }
    PlantData { states, measurements }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub exit_status: ExitStatus,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub final_penalty: f64,
    pub solve_time_ms: f64,
    /// Largest `|x̂_t − x_t|` over the window.
    pub max_state_error: f64,
    /// Final `‖Δy‖∞`, the ALM infeasibility measure.
    pub delta_y_norm: f64,
    /// `‖F1(û)‖∞`
    pub max_residual: f64,
    /// Penalty at the start of each outer iteration.
    pub penalty_trajectory: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MheResult {
    pub horizon: usize,
    pub base_seed: u64,
    pub trials: Vec<TrialRecord>,
    pub max_outer_iterations: usize,
    pub max_final_penalty: f64,
    pub median_inner_iterations: f64,
    pub median_solve_ms: f64,
}

impl MheResult {
    pub fn all_converged(&self) -> bool {
        self.trials.iter().all(|t| t.exit_status == ExitStatus::Converged)
    }
}

pub const DEFAULT_SEED: u64 = 2020;

/// Runs one estimation trial; the generator seed is `base_seed + trial`.
pub fn run_trial(mhe: &MheProblem, trial: usize, base_seed: u64, noise: f64) -> Result<(TrialRecord, PlantData, Vec<f64>)> {
    let seed = base_seed.wrapping_add(trial as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plant = simulate_plant(mhe.horizon, &mut rng, noise);
    let problem = mhe.problem();
    let mut solver = AlmSolver::new(&problem, config())?;
    solver.enable_trace();
    let u0 = vec![0.0; mhe.n()];
    let report = solver.solve(&plant.measurements, &u0, None)?;
    let trace = solver.take_trace();

    let xs = mhe.states(&report.solution);
    let max_state_error = plant
        .states
        .iter()
        .enumerate()
        .flat_map(|(t, x)| (0..3).map(move |i| (xs[3 * t + i] - x[i]).abs()))
        .fold(0.0, f64::max);
    let mut res = vec![0.0; mhe.n1()];
    mhe.residuals(&report.solution, &plant.measurements, &mut res);

    let record = TrialRecord {
        trial,
        seed,
        exit_status: report.exit_status,
        outer_iterations: report.num_outer_iterations,
        inner_iterations: report.num_inner_iterations,
        final_penalty: report.penalty,
        solve_time_ms: report.solve_time.as_secs_f64() * 1e3,
        max_state_error,
        delta_y_norm: report.delta_y_norm,
        max_residual: norm_inf(&res),
        penalty_trajectory: trace.iter().map(|s| s.penalty).collect(),
    };
    Ok((record, plant, report.solution))
}

/// Runs `trials` independent estimation problems, in parallel across the
/// available cores.
pub fn run_mhe(horizon: usize, trials: usize, base_seed: u64) -> Result<MheResult> {
    let mhe = MheProblem::new(horizon);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(trials.max(1));
    let mut records: Vec<Result<TrialRecord>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    (w..trials)
                        .step_by(workers)
                        .map(|k| run_trial(&mhe, k, base_seed, 1.0).map(|r| r.0))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("trial worker panicked")).collect()
    });
    records.sort_by_key(|r| r.as_ref().map_or(usize::MAX, |t| t.trial));
    let trials = records.into_iter().collect::<Result<Vec<_>>>()?;

    let inner: Vec<f64> = trials.iter().map(|t| t.inner_iterations as f64).collect();
    let times: Vec<f64> = trials.iter().map(|t| t.solve_time_ms).collect();
    Ok(MheResult {
        horizon,
        base_seed,
        max_outer_iterations: trials.iter().map(|t| t.outer_iterations).max().unwrap_or(0),
        max_final_penalty: trials.iter().map(|t| t.final_penalty).fold(0.0, f64::max),
        median_inner_iterations: if inner.is_empty() { f64::NAN } else { median(&inner) },
        median_solve_ms: if times.is_empty() { f64::NAN } else { median(&times) },
        trials,
    })
}
