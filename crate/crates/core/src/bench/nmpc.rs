//! Obstacle avoidance for a kinematic bicycle, eliminated by single shooting.
//!
//! State `x = (pₓ, p_y, ψ, v)`, input `u = (a, δ)`, Euler step
//!
//! ```text
//! pₓ⁺ = pₓ + Tₛ v cos ψ        ψ⁺ = ψ + Tₛ (v/L) tan δ
//! p_y⁺ = p_y + Tₛ v sin ψ       v⁺ = v + Tₛ α (a − v)
//! ```
//!
//! The decision vector stacks the `N` inputs; the parameter is
//! `p = (x₀, u₋₁)` with `u₋₁` the input applied at the previous sampling
//! instant (it enters the rate cost of the first stage). The obstacle is a
//! disc that every predicted state `x₁..x_N` must avoid.

use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;

use crate::alm::AlmSolver;
use crate::config::SolverConfig;
use crate::error::Result;
use crate::problem::ProblemDefinition;
use crate::report::ExitStatus;
use crate::sets::ConstraintSet;

use super::{median, Encoding};

pub const NX: usize = 4;
pub const NU: usize = 2;

/// Discrete-time optimal control problem eliminated into the inputs only.
///
/// Gradients are computed by a backward (adjoint) sweep through the state
/// recursion; see [`single_shooting_gradient`].
pub trait ShootingModel {
    fn nx(&self) -> usize;
    fn nu(&self) -> usize;
    fn horizon(&self) -> usize;
    fn step(&self, x: &[f64], u: &[f64], next: &mut [f64]);
    /// Row-major `∂x⁺/∂x` (`nx × nx`) and `∂x⁺/∂u` (`nx × nu`).
    fn jacobians(&self, x: &[f64], u: &[f64], a: &mut [f64], b: &mut [f64]);
    fn stage_cost(&self, x: &[f64]) -> f64;
    fn stage_cost_grad(&self, x: &[f64], g: &mut [f64]);
    fn terminal_cost(&self, x: &[f64]) -> f64;
    fn terminal_cost_grad(&self, x: &[f64], g: &mut [f64]);
    /// Terms depending on inputs only; `u` is the whole input sequence.
    fn input_cost(&self, u: &[f64], u_prev: &[f64]) -> f64;
    /// Overwrites `g` with the gradient of [`ShootingModel::input_cost`].
    fn input_cost_grad(&self, u: &[f64], u_prev: &[f64], g: &mut [f64]);
}

/// States `x₀..x_N`, stacked.
pub fn simulate<M: ShootingModel + ?Sized>(model: &M, u: &[f64], x0: &[f64]) -> Vec<f64> {
    let (nx, nu, n) = (model.nx(), model.nu(), model.horizon());
    let mut xs = vec![0.0; (n + 1) * nx];
    xs[..nx].copy_from_slice(x0);
    for t in 0..n {
        let (head, tail) = xs.split_at_mut((t + 1) * nx);
        model.step(&head[t * nx..], &u[t * nu..(t + 1) * nu], &mut tail[..nx]);
    }
    xs
}

pub fn single_shooting_cost<M: ShootingModel + ?Sized>(model: &M, u: &[f64], x0: &[f64], u_prev: &[f64]) -> f64 {
    let (nx, n) = (model.nx(), model.horizon());
    let xs = simulate(model, u, x0);
    let stages: f64 = (0..n).map(|t| model.stage_cost(&xs[t * nx..(t + 1) * nx])).sum();
    stages + model.terminal_cost(&xs[n * nx..]) + model.input_cost(u, u_prev)
}

/// Gradient of [`single_shooting_cost`] with respect to the input sequence.
pub fn single_shooting_gradient<M: ShootingModel + ?Sized>(
    model: &M,
    u: &[f64],
    x0: &[f64],
    u_prev: &[f64],
    grad: &mut [f64],
) {
    let xs = simulate(model, u, x0);
    model.input_cost_grad(u, u_prev, grad);
    let n = model.horizon();
    state_adjoint(model, u, &xs, grad, |t, x, g| {
        if t == n {
            model.terminal_cost_grad(x, g)
        } else {
            model.stage_cost_grad(x, g)
        }
    });
}

/// Adds to `grad` the input gradient of `Σ_{t=0..N} h_t(x_t)`, where
/// `state_grad(t, x_t, g)` writes `∇h_t(x_t)`.
///
/// Backward sweep: `λ_N = ∇h_N`, `∇_{u_t} += B_tᵀ λ_{t+1}`,
/// `λ_t = A_tᵀ λ_{t+1} + ∇h_t`.
pub fn state_adjoint<M, G>(model: &M, u: &[f64], xs: &[f64], grad: &mut [f64], mut state_grad: G)
where
    M: ShootingModel + ?Sized,
    G: FnMut(usize, &[f64], &mut [f64]),
{
    let (nx, nu, n) = (model.nx(), model.nu(), model.horizon());
    let mut lambda = vec![0.0; nx];
    let mut next = vec![0.0; nx];
    let mut gx = vec![0.0; nx];
    let mut a = vec![0.0; nx * nx];
    let mut b = vec![0.0; nx * nu];
    state_grad(n, &xs[n * nx..(n + 1) * nx], &mut lambda);
    for t in (0..n).rev() {
        let x = &xs[t * nx..(t + 1) * nx];
        let ut = &u[t * nu..(t + 1) * nu];
        model.jacobians(x, ut, &mut a, &mut b);
        for j in 0..nu {
            grad[t * nu + j] += (0..nx).map(|i| b[i * nu + j] * lambda[i]).sum::<f64>();
        }
        state_grad(t, x, &mut gx);
        for j in 0..nx {
            next[j] = (0..nx).map(|i| a[i * nx + j] * lambda[i]).sum::<f64>() + gx[j];
        }
        std::mem::swap(&mut lambda, &mut next);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Obstacle {
    /// `r² − ‖(pₓ, p_y) − centre‖²`; positive inside the disc.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        self.radius * self.radius - dx * dx - dy * dy
    }

    pub fn squared_distance(&self, x: &[f64]) -> f64 {
        (x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2)
    }

    fn violation_grad(&self, x: &[f64], g: &mut [f64]) {
        g.fill(0.0);
        g[0] = -2.0 * (x[0] - self.center[0]);
        g[1] = -2.0 * (x[1] - self.center[1]);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NmpcProblem {
    pub horizon: usize,
    pub sampling_time: f64,
    /// Velocity time constant α.
    pub alpha: f64,
    pub wheelbase: f64,
    pub obstacle: Obstacle,
    pub stage_weights: [f64; 3],
    pub terminal_weights: [f64; 3],
    pub rate_weights: [f64; 2],
    pub accel_bounds: [f64; 2],
    pub max_steering: f64,
}

impl Default for NmpcProblem {
    fn default() -> Self {
        NmpcProblem {
            horizon: 100,
            sampling_time: 0.05,
            alpha: 0.25,
            wheelbase: 0.5,
            obstacle: Obstacle { center: [-3.0, 0.2], radius: 0.65 },
            // (position, heading, speed)
            stage_weights: [18.0, 2.0, 5.0],
            terminal_weights: [1500.0, 500.0, 10.0],
            rate_weights: [100.0, 30.0],
            accel_bounds: [-1.0, 2.0],
            max_steering: 0.25,
        }
    }
}

/// Start state of the closed-loop runs: behind the obstacle on the negative
/// x-axis, at rest.
pub const INITIAL_STATE: [f64; 4] = [-5.0, 0.0, 0.0, 0.0];

impl ShootingModel for NmpcProblem {
    fn nx(&self) -> usize {
        NX
    }

    fn nu(&self) -> usize {
        NU
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn step(&self, x: &[f64], u: &[f64], next: &mut [f64]) {
        let ts = self.sampling_time;
        let (psi, v) = (x[2], x[3]);
        next[0] = x[0] + ts * v * psi.cos();
        next[1] = x[1] + ts * v * psi.sin();
        next[2] = psi + ts * v * u[1].tan() / self.wheelbase;
        next[3] = v + ts * self.alpha * (u[0] - v);
    }

    fn jacobians(&self, x: &[f64], u: &[f64], a: &mut [f64], b: &mut [f64]) {
        let ts = self.sampling_time;
        let (psi, v) = (x[2], x[3]);
        let (s, c) = psi.sin_cos();
        #[rustfmt::skip]
        a.copy_from_slice(&[
            1.0, 0.0, -ts * v * s, ts * c,
            0.0, 1.0, ts * v * c, ts * s,
            0.0, 0.0, 1.0, ts * u[1].tan() / self.wheelbase,
            0.0, 0.0, 0.0, 1.0 - ts * self.alpha,
        ]);
        let cd = u[1].cos();
        #[rustfmt::skip]
        b.copy_from_slice(&[
            0.0, 0.0,
            0.0, 0.0,
            0.0, ts * v / (self.wheelbase * cd * cd),
            ts * self.alpha, 0.0,
        ]);
    }

    fn stage_cost(&self, x: &[f64]) -> f64 {
        let [wp, wh, wv] = self.stage_weights;
        wp * (x[0] * x[0] + x[1] * x[1]) + wh * x[2] * x[2] + wv * x[3] * x[3]
    }

    fn stage_cost_grad(&self, x: &[f64], g: &mut [f64]) {
        let [wp, wh, wv] = self.stage_weights;
        g.copy_from_slice(&[2.0 * wp * x[0], 2.0 * wp * x[1], 2.0 * wh * x[2], 2.0 * wv * x[3]]);
    }

    fn terminal_cost(&self, x: &[f64]) -> f64 {
        let [wp, wh, wv] = self.terminal_weights;
        wp * (x[0] * x[0] + x[1] * x[1]) + wh * x[2] * x[2] + wv * x[3] * x[3]
    }

    fn terminal_cost_grad(&self, x: &[f64], g: &mut [f64]) {
        let [wp, wh, wv] = self.terminal_weights;
        g.copy_from_slice(&[2.0 * wp * x[0], 2.0 * wp * x[1], 2.0 * wh * x[2], 2.0 * wv * x[3]]);
    }

    fn input_cost(&self, u: &[f64], u_prev: &[f64]) -> f64 {
        let mut prev = u_prev;
        let mut total = 0.0;
        for ut in u.chunks_exact(NU) {
            for j in 0..NU {
                total += self.rate_weights[j] * (ut[j] - prev[j]).powi(2);
            }
            prev = ut;
        }
        total
    }

    fn input_cost_grad(&self, u: &[f64], u_prev: &[f64], g: &mut [f64]) {
        g.fill(0.0);
        for t in 0..self.horizon {
            for j in 0..NU {
                let prev = if t == 0 { u_prev[j] } else { u[(t - 1) * NU + j] };
                let d = 2.0 * self.rate_weights[j] * (u[t * NU + j] - prev);
                g[t * NU + j] += d;
                if t > 0 {
                    g[(t - 1) * NU + j] -= d;
                }
            }
        }
    }
}

impl NmpcProblem {
    pub fn n(&self) -> usize {
        NU * self.horizon
    }

    /// Parameter length: initial state plus previous input.
    pub const NP: usize = NX + NU;

    pub fn input_set(&self) -> ConstraintSet {
        let mut lo = Vec::with_capacity(self.n());
        let mut hi = Vec::with_capacity(self.n());
        for _ in 0..self.horizon {
            lo.extend([self.accel_bounds[0], -self.max_steering]);
            hi.extend([self.accel_bounds[1], self.max_steering]);
        }
        ConstraintSet::rectangle(lo, hi).expect("valid input bounds")
    }

    /// Obstacle rows `g_t = r² − d²(x_t)` for `t = 1..N`.
    pub fn obstacle_rows(&self, xs: &[f64], out: &mut [f64]) {
        for t in 1..=self.horizon {
            out[t - 1] = self.obstacle.violation(&xs[t * NX..(t + 1) * NX]);
        }
    }

    /// Adds `Σ_t w_t ∇_u g_t` to `grad`.
    fn obstacle_jt(&self, u: &[f64], xs: &[f64], w: &[f64], grad: &mut [f64]) {
        let obstacle = self.obstacle;
        state_adjoint(self, u, xs, grad, |t, x, g| {
            if t == 0 {
                g.fill(0.0);
            } else {
                obstacle.violation_grad(x, g);
                g.iter_mut().for_each(|v| *v *= w[t - 1]);
            }
        });
    }

    pub fn problem(&self, encoding: Encoding) -> ProblemDefinition {
        let me = Arc::new(self.clone());
        let n = self.n();
        let nrows = self.horizon;
        let m = me.clone();
        let cost = move |u: &[f64], p: &[f64]| single_shooting_cost(&*m, u, &p[..NX], &p[NX..]);
        let m = me.clone();
        let grad = move |u: &[f64], p: &[f64], g: &mut [f64]| single_shooting_gradient(&*m, u, &p[..NX], &p[NX..], g);
        let base = ProblemDefinition::new(n, Self::NP, cost, grad, self.input_set());
        let (m1, m2) = (me.clone(), me);
        match encoding {
            Encoding::Alm => base.with_aug_lagrangian_constraints(
                nrows,
                move |u, p, out| m1.obstacle_rows(&simulate(&*m1, u, &p[..NX]), out),
                move |u, p, w, out| {
                    out.fill(0.0);
                    m2.obstacle_jt(u, &simulate(&*m2, u, &p[..NX]), w, out);
                },
                ConstraintSet::rectangle(vec![f64::NEG_INFINITY; nrows], vec![0.0; nrows]).expect("valid box"),
            ),
            Encoding::Penalty => base.with_penalty_constraints(
                nrows,
                move |u, p, out| {
                    m1.obstacle_rows(&simulate(&*m1, u, &p[..NX]), out);
                    out.iter_mut().for_each(|g| *g = g.max(0.0));
                },
                move |u, p, out| {
                    let xs = simulate(&*m2, u, &p[..NX]);
                    let mut w = vec![0.0; nrows];
                    m2.obstacle_rows(&xs, &mut w);
                    // ∇([g]₊²) = 2[g]₊∇g
                    w.iter_mut().for_each(|g| *g = 2.0 * g.max(0.0));
                    out.fill(0.0);
                    m2.obstacle_jt(u, &xs, &w, out);
                },
            ),
        }
    }
}

/// Solver settings of the closed-loop study.
pub fn config() -> SolverConfig {
    SolverConfig::builder()
        .epsilon(1e-4)
        .epsilon0(1e-4)
        .delta(1e-3)
        .rho(5.0)
        .c0(500.0)
        .lbfgs_memory(20)
        .build()
        .expect("valid config")
}

#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub exit_status: Option<ExitStatus>,
    pub error: Option<String>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub penalty: f64,
    /// Optimal value of the horizon cost.
    pub cost: f64,
    pub solve_time_ms: f64,
    pub state: [f64; 4],
    pub input: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedLoopResult {
    pub encoding: Encoding,
    pub initial_state: [f64; 4],
    /// Plant states, `steps + 1` entries.
    pub states: Vec<[f64; 4]>,
    pub steps: Vec<StepRecord>,
    /// Minimum over plant states of the squared distance to the obstacle centre.
    pub min_obstacle_distance_sq: f64,
    pub obstacle_radius: f64,
    /// `‖(pₓ, p_y, ψ)‖` at the final plant state.
    pub final_pose_error: f64,
    pub median_solve_ms: f64,
    pub max_solve_ms: f64,
}

impl ClosedLoopResult {
    pub fn all_converged(&self) -> bool {
        self.steps.iter().all(|s| s.exit_status == Some(ExitStatus::Converged))
    }

    /// CSV trajectory dump: `step,px,py,psi,v,a,delta,status,cost,solve_ms`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,px,py,psi,v,a,delta,status,cost,solve_ms\n");
        for s in &self.steps {
            let status = s.exit_status.map_or("error", |e| e.as_str());
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                s.step, s.state[0], s.state[1], s.state[2], s.state[3], s.input[0], s.input[1], status, s.cost, s.solve_time_ms
            ));
        }
        out
    }
}

/// Receding-horizon simulation: solve, apply the first input to the plant
/// (the same Euler model), shift the solution to warm-start the next solve.
pub fn run_nmpc_closed_loop(
    nmpc: &NmpcProblem,
    encoding: Encoding,
    sim_steps: usize,
    x0: [f64; 4],
) -> Result<ClosedLoopResult> {
    assert!(sim_steps >= 1, "at least one simulation step");
    let problem = nmpc.problem(encoding);
    let mut solver = AlmSolver::new(&problem, config())?;
    let n = nmpc.n();
    let n1 = problem.n1;

    let mut x = x0;
    let mut u_prev = [0.0; 2];
    let mut u_guess = vec![0.0; n];
    let mut y_guess = vec![0.0; n1];
    let mut states = vec![x];
    let mut steps = Vec::with_capacity(sim_steps);
    let mut p = [0.0; NX + NU];

    for k in 0..sim_steps {
        p[..NX].copy_from_slice(&x);
        p[NX..].copy_from_slice(&u_prev);
        let y0 = (n1 > 0).then_some(y_guess.as_slice());
        let record = match solver.solve(&p, &u_guess, y0) {
            Ok(report) => {
                let input = [report.solution[0], report.solution[1]];
                shift(&report.solution, NU, &mut u_guess);
                if n1 > 0 {
                    shift(&report.lagrange_multipliers, 1, &mut y_guess);
                }
                StepRecord {
                    step: k,
                    exit_status: Some(report.exit_status),
                    error: None,
                    outer_iterations: report.num_outer_iterations,
                    inner_iterations: report.num_inner_iterations,
                    penalty: report.penalty,
                    cost: report.cost,
                    solve_time_ms: duration_ms(report.solve_time),
                    state: x,
                    input,
                }
            }
            Err(e) => StepRecord {
                step: k,
                exit_status: None,
                error: Some(e.to_string()),
                outer_iterations: 0,
                inner_iterations: 0,
                penalty: f64::NAN,
                cost: f64::NAN,
                solve_time_ms: 0.0,
                state: x,
                input: u_prev,
            },
        };
        let mut next = [0.0; 4];
        nmpc.step(&x, &record.input, &mut next);
        u_prev = record.input;
        x = next;
        states.push(x);
        steps.push(record);
    }

    let times: Vec<f64> = steps.iter().map(|s| s.solve_time_ms).collect();
    Ok(ClosedLoopResult {
        encoding,
        initial_state: x0,
        min_obstacle_distance_sq: states
            .iter()
            .map(|s| nmpc.obstacle.squared_distance(s))
            .fold(f64::INFINITY, f64::min),
        obstacle_radius: nmpc.obstacle.radius,
        final_pose_error: (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt(),
        median_solve_ms: median(&times),
        max_solve_ms: times.iter().copied().fold(0.0, f64::max),
        states,
        steps,
    })
}

/// Drops the first block of `width` entries and repeats the last block.
fn shift(src: &[f64], width: usize, dst: &mut [f64]) {
    let len = src.len();
    dst[..len - width].copy_from_slice(&src[width..]);
    dst[len - width..].copy_from_slice(&src[len - width..]);
}

fn duration_ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}
