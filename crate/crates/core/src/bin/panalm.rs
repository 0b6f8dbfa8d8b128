//! Command-line front end: reference benchmarks, the TCP server and a quick
//! self-test.

use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use panalm::bench::{self, mhe, nmpc, rosenbrock, BenchProblemId, Encoding};
use panalm::server::{RunResponse, Server, ServerConfig};
use panalm::{AlmSolver, ExitStatus};

#[derive(Parser)]
#[command(name = "panalm", version, about = "Nonconvex parametric optimisation: benchmarks and TCP server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodingArg {
    Penalty,
    Alm,
}

impl From<EncodingArg> for Encoding {
    fn from(e: EncodingArg) -> Self {
        match e {
            EncodingArg::Penalty => Encoding::Penalty,
            EncodingArg::Alm => Encoding::Alm,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the constrained Rosenbrock problem once.
    Rosenbrock {
        #[arg(long, value_enum, default_value = "alm")]
        encoding: EncodingArg,
        /// Parameter `p1,p2,p3`.
        #[arg(long, default_value = "1,50,1.5", value_parser = parse_parameter)]
        p: [f64; 3],
        /// Write the result as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-loop obstacle avoidance with the bicycle model.
    Nmpc {
        #[arg(long, value_enum, default_value = "alm")]
        encoding: EncodingArg,
        #[arg(long, default_value_t = 300, value_parser = clap::value_parser!(u64).range(1..))]
        steps: u64,
        /// Write the result as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the trajectory as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Lorenz moving-horizon estimation over random trials.
    Mhe {
        /// Window length: 50, 100 or 150.
        #[arg(long, default_value_t = 100, value_parser = parse_horizon)]
        horizon: usize,
        #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long, default_value_t = mhe::DEFAULT_SEED)]
        seed: u64,
        /// Write the result as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve a benchmark problem over TCP until a Kill request.
    Serve {
        /// One of: rosenbrock-alm, rosenbrock-penalty, nmpc-alm, nmpc-penalty, mhe-50, mhe-100, mhe-150.
        #[arg(long, default_value = "rosenbrock-alm")]
        problem: BenchProblemId,
        #[arg(long, default_value = "127.0.0.1")]
        ip: IpAddr,
        #[arg(long, default_value_t = panalm::server::DEFAULT_PORT, value_parser = clap::value_parser!(u16).range(1..))]
        port: u16,
    },
    /// Run quick invariant checks.
    Selftest,
}

fn parse_parameter(s: &str) -> Result<[f64; 3], String> {
    let values: Vec<f64> = s.split(',').map(|v| v.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    values.try_into().map_err(|v: Vec<f64>| format!("expected 3 comma-separated numbers, got {}", v.len()))
}

fn parse_horizon(s: &str) -> Result<usize, String> {
    match s.parse() {
        Ok(n @ (50 | 100 | 150)) => Ok(n),
        _ => Err("expected 50, 100 or 150".into()),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    std::fs::write(path, text)
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Rosenbrock { encoding, p, out } => {
            let encoding = Encoding::from(encoding);
            let problem = rosenbrock::problem(encoding);
            let report = AlmSolver::new(&problem, rosenbrock::config())?.solve(&p, &[0.0; rosenbrock::N], None)?;
            println!("encoding             {encoding}");
            println!("status               {}", report.exit_status);
            println!("outer iterations     {}", report.num_outer_iterations);
            println!("inner iterations     {}", report.num_inner_iterations);
            println!("‖Δy‖∞                {:.3e}", report.delta_y_norm);
            println!("‖F2‖∞                {:.3e}", report.f2_norm);
            println!("cost                 {:.8}", report.cost);
            println!("penalty              {}", report.penalty);
            println!("solution             {:?}", report.solution);
            println!("multipliers          {:?}", report.lagrange_multipliers);
            println!("time                 {:.3} ms", report.solve_time.as_secs_f64() * 1e3);
            if let Some(path) = out {
                write_json(&path, &RunResponse::from(&report))?;
            }
            Ok(report.exit_status == ExitStatus::Converged)
        }
        Command::Nmpc { encoding, steps, out, csv } => {
            let model = nmpc::NmpcProblem::default();
            let result = nmpc::run_nmpc_closed_loop(&model, encoding.into(), steps as usize, nmpc::INITIAL_STATE)?;
            let failures = result
                .steps
                .iter()
                .filter(|s| s.error.is_some() || s.exit_status == Some(ExitStatus::OracleFailure))
                .count();
            let converged = result.steps.iter().filter(|s| s.exit_status == Some(ExitStatus::Converged)).count();
            let r2 = model.obstacle.radius.powi(2);
            println!("encoding                  {}", result.encoding);
            println!("steps (converged)         {} ({converged})", result.steps.len());
            println!("min distance² / r²        {:.5}", result.min_obstacle_distance_sq / r2);
            println!("final ‖(px, py, ψ)‖       {:.5}", result.final_pose_error);
            println!("solve time median / max   {:.3} / {:.3} ms", result.median_solve_ms, result.max_solve_ms);
            if let Some(path) = out {
                write_json(&path, &result)?;
            }
            if let Some(path) = csv {
                std::fs::write(path, result.to_csv())?;
            }
            Ok(failures == 0)
        }
        Command::Mhe { horizon, trials, seed, out } => {
            let result = mhe::run_mhe(horizon, trials as usize, seed)?;
            println!("trial  seed        status              outer  inner   penalty     max|x̂−x|");
            for t in &result.trials {
                println!(
                    "{:>5}  {:<10}  {:<18}  {:>5}  {:>5}  {:>10.1}  {:>9.4}",
                    t.trial, t.seed, t.exit_status, t.outer_iterations, t.inner_iterations, t.final_penalty, t.max_state_error
                );
            }
            println!("max outer iterations     {}", result.max_outer_iterations);
            println!("max final penalty        {:.1}", result.max_final_penalty);
            println!("median inner iterations  {}", result.median_inner_iterations);
            println!("median solve time        {:.2} ms", result.median_solve_ms);
            if let Some(path) = out {
                write_json(&path, &result)?;
            }
            Ok(result.trials.iter().all(|t| t.exit_status != ExitStatus::OracleFailure))
        }
        Command::Serve { problem, ip, port } => {
            let config = ServerConfig { bind_ip: ip, port, ..ServerConfig::default() };
            let server = Server::bind(problem.problem(), problem.config(), config)?;
            eprintln!("serving {problem} on {}", server.local_addr()?);
            server.run()?;
            Ok(true)
        }
        Command::Selftest => {
            let outcomes = bench::run_selftest();
            for o in &outcomes {
                println!("{}  {:<28} {}", if o.passed { "ok  " } else { "FAIL" }, o.name, o.detail);
            }
            Ok(outcomes.iter().all(|o| o.passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
