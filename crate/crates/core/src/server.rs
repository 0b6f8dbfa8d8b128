//! TCP service for one parametric problem, speaking newline-delimited JSON.
//!
//! Every request is a single line holding a JSON object with exactly one key;
//! every request line gets exactly one response line.
//!
//! | request                         | response                                  |
//! |---------------------------------|-------------------------------------------|
//! | `{"Ping": 1}`                   | `{"Pong": 1}`                             |
//! | `{"Run": {"parameter": [...]}}` | `{"Solution": {...}}`                     |
//! | `{"Kill": 1}`                   | `{"Pong": 1}`, then the server shuts down |
//!
//! `Run` also accepts `initial_guess`, `initial_y` and `initial_penalty`.
//! Failures are reported as `{"Error": {"code": c, "message": "..."}}`:
//!
//! * `1000` malformed request (bad JSON, wrong shape, oversized line)
//! * `1600` a vector has the wrong length
//! * `2000` the solver failed (oracle failure or non-finite result)
//! * `3003` unsupported request key
//!
//! Runs are executed one at a time by a single solver thread, so concurrent
//! clients queue. The server keeps the last converged solution and
//! multipliers and uses them to warm-start the next run unless the request
//! provides its own starting point (see [`warm_start_policy`]).

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{IpAddr, Ipv4Addr, Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::alm::AlmSolver;
use crate::config::SolverConfig;
use crate::error::Error;
use crate::problem::ProblemDefinition;
use crate::report::{ExitStatus, SolverReport};

pub const DEFAULT_PORT: u16 = 8333;
pub const MIN_REQUEST_BYTES: usize = 4096;

pub const ERR_MALFORMED: u32 = 1000;
pub const ERR_WRONG_LENGTH: u32 = 1600;
pub const ERR_SOLVER: u32 = 2000;
pub const ERR_UNSUPPORTED: u32 = 3003;

#[derive(Debug, Clone, PartialEq)]
pub struct ServerConfig {
    pub bind_ip: IpAddr,
    pub port: u16,
    /// Longest accepted request line, newline excluded.
    pub max_request_bytes: usize,
    /// Idle connections are dropped after this long without a request.
    pub read_timeout: Option<Duration>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind_ip: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: DEFAULT_PORT,
            max_request_bytes: 1 << 20,
            read_timeout: None,
        }
    }
}

impl ServerConfig {
    pub fn validate(&self) -> Result<(), ServerError> {
        if self.port == 0 {
            return Err(ServerError::Config("port must be in [1, 65535]".into()));
        }
        if self.max_request_bytes < MIN_REQUEST_BYTES {
            return Err(ServerError::Config(format!("max_request_bytes must be at least {MIN_REQUEST_BYTES}")));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("invalid server configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Problem(#[from] Error),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRequest {
    pub parameter: Vec<f64>,
    #[serde(default)]
    pub initial_guess: Option<Vec<f64>>,
    #[serde(default)]
    pub initial_y: Option<Vec<f64>>,
    #[serde(default)]
    pub initial_penalty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResponse {
    pub exit_status: String,
    pub num_outer_iterations: usize,
    pub num_inner_iterations: usize,
    pub last_problem_norm_fpr: f64,
    pub delta_y_norm: f64,
    pub f2_norm: f64,
    pub penalty: f64,
    pub cost: f64,
    pub solve_time_ms: f64,
    pub solution: Vec<f64>,
    pub lagrange_multipliers: Vec<f64>,
}

impl From<&SolverReport> for RunResponse {
    fn from(r: &SolverReport) -> Self {
        RunResponse {
            exit_status: r.exit_status.as_str().to_owned(),
            num_outer_iterations: r.num_outer_iterations,
            num_inner_iterations: r.num_inner_iterations,
            last_problem_norm_fpr: r.last_fpr_norm,
            delta_y_norm: r.delta_y_norm,
            f2_norm: r.f2_norm,
            penalty: r.penalty,
            cost: r.cost,
            solve_time_ms: r.solve_time.as_secs_f64() * 1e3,
            solution: r.solution.clone(),
            lagrange_multipliers: r.lagrange_multipliers.clone(),
        }
    }
}

impl RunResponse {
    fn all_finite(&self) -> bool {
        [self.last_problem_norm_fpr, self.delta_y_norm, self.f2_norm, self.penalty, self.cost, self.solve_time_ms]
            .iter()
            .chain(&self.solution)
            .chain(&self.lagrange_multipliers)
            .all(|v| v.is_finite())
    }
}

/// Starting point `(u0, y0, c0)` of a run.
///
/// Explicit request fields win; otherwise the previous run's solution and
/// multipliers are reused if it converged; otherwise zeros. The penalty is
/// the requested one or `c0`.
pub fn warm_start_policy(
    previous: Option<&SolverReport>,
    request: &RunRequest,
    n: usize,
    n1: usize,
    c0: f64,
) -> (Vec<f64>, Vec<f64>, f64) {
    let previous = previous.filter(|r| r.exit_status == ExitStatus::Converged);
    let u0 = request
        .initial_guess
        .clone()
        .or_else(|| previous.map(|r| r.solution.clone()))
        .unwrap_or_else(|| vec![0.0; n]);
    let y0 = request
        .initial_y
        .clone()
        .or_else(|| previous.map(|r| r.lagrange_multipliers.clone()))
        .unwrap_or_else(|| vec![0.0; n1]);
    (u0, y0, request.initial_penalty.unwrap_or(c0))
}

fn error_line(code: u32, message: impl Into<String>) -> String {
    json!({ "Error": { "code": code, "message": message.into() } }).to_string()
}

/// Writes `line` and its newline in one call so they leave in one segment.
fn send_line(writer: &mut impl Write, mut line: String) -> io::Result<()> {
    line.push('\n');
    writer.write_all(line.as_bytes())?;
    writer.flush()
}

fn pong_line() -> String {
    json!({ "Pong": 1 }).to_string()
}

enum Parsed {
    Ping,
    Kill,
    Run(RunRequest),
}

fn parse_request(line: &[u8]) -> Result<Parsed, String> {
    let text = std::str::from_utf8(line).map_err(|_| error_line(ERR_MALFORMED, "request is not valid UTF-8"))?;
    let value: Value =
        serde_json::from_str(text).map_err(|e| error_line(ERR_MALFORMED, format!("invalid JSON: {e}")))?;
    let Value::Object(map) = value else {
        return Err(error_line(ERR_MALFORMED, "request must be a JSON object"));
    };
    if map.len() != 1 {
        return Err(error_line(ERR_MALFORMED, "request must have exactly one key"));
    }
    let (key, body) = map.into_iter().next().expect("one entry");
    match key.as_str() {
        "Ping" => Ok(Parsed::Ping),
        "Kill" => Ok(Parsed::Kill),
        "Run" => serde_json::from_value(body)
            .map(Parsed::Run)
            .map_err(|e| error_line(ERR_MALFORMED, format!("invalid Run request: {e}"))),
        other => Err(error_line(ERR_UNSUPPORTED, format!("unsupported request `{other}`"))),
    }
}

fn check_lengths(req: &RunRequest, problem: &ProblemDefinition) -> Result<(), String> {
    let checks = [
        ("parameter", Some(req.parameter.len()), problem.n_p),
        ("initial_guess", req.initial_guess.as_ref().map(Vec::len), problem.n),
        ("initial_y", req.initial_y.as_ref().map(Vec::len), problem.n1),
    ];
    for (name, found, expected) in checks {
        if let Some(found) = found.filter(|&f| f != expected) {
            return Err(error_line(ERR_WRONG_LENGTH, format!("{name} has length {found}, expected {expected}")));
        }
    }
    if let Some(c) = req.initial_penalty {
        if !(c > 0.0 && c.is_finite()) {
            return Err(error_line(ERR_MALFORMED, "initial_penalty must be positive"));
        }
    }
    Ok(())
}

struct Job {
    request: RunRequest,
    reply: mpsc::Sender<String>,
}

/// Owns the solver; executes queued runs one after another.
fn executor(problem: &ProblemDefinition, config: SolverConfig, jobs: mpsc::Receiver<Job>) {
    let c0 = config.c0;
    let mut solver = AlmSolver::new(problem, config).expect("problem and config validated at bind");
    let mut previous: Option<SolverReport> = None;
    for job in jobs {
        let line = match check_lengths(&job.request, problem) {
            Err(line) => line,
            Ok(()) => {
                let (u0, y0, c) = warm_start_policy(previous.as_ref(), &job.request, problem.n, problem.n1, c0);
                match solver.solve_with_penalty(&job.request.parameter, &u0, Some(&y0), c) {
                    Err(e @ Error::DimensionMismatch { .. }) => error_line(ERR_WRONG_LENGTH, e.to_string()),
                    Err(e) => error_line(ERR_SOLVER, e.to_string()),
                    Ok(report) => {
                        let response = RunResponse::from(&report);
                        let line = if report.exit_status == ExitStatus::OracleFailure || !response.all_finite() {
                            error_line(ERR_SOLVER, format!("solver failed with status {}", report.exit_status))
                        } else {
                            json!({ "Solution": response }).to_string()
                        };
                        previous = Some(report);
                        line
                    }
                }
            }
        };
        let _ = job.reply.send(line);
    }
}

/// Bound listener plus the problem it serves.
pub struct Server {
    listener: TcpListener,
    problem: ProblemDefinition,
    solver_config: SolverConfig,
    config: ServerConfig,
}

impl Server {
    pub fn bind(problem: ProblemDefinition, solver_config: SolverConfig, config: ServerConfig) -> Result<Server, ServerError> {
        config.validate()?;
        Self::bind_port(problem, solver_config, config)
    }

    /// Binds to an OS-assigned port, ignoring `config.port`; see
    /// [`Server::local_addr`].
    pub fn bind_ephemeral(
        problem: ProblemDefinition,
        solver_config: SolverConfig,
        config: ServerConfig,
    ) -> Result<Server, ServerError> {
        ServerConfig { port: 1, ..config.clone() }.validate()?;
        Self::bind_port(problem, solver_config, ServerConfig { port: 0, ..config })
    }

    fn bind_port(problem: ProblemDefinition, solver_config: SolverConfig, config: ServerConfig) -> Result<Server, ServerError> {
        // Fail at bind time rather than inside the executor.
        AlmSolver::new(&problem, solver_config.clone())?;
        let listener = TcpListener::bind((config.bind_ip, config.port))?;
        Ok(Server { listener, problem, solver_config, config })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until a `Kill` request arrives. All client connections are
    /// closed before returning.
    pub fn run(self) -> Result<(), ServerError> {
        let addr = self.listener.local_addr()?;
        let shutdown = AtomicBool::new(false);
        let connections: Mutex<Vec<TcpStream>> = Mutex::new(Vec::new());
        let (job_tx, job_rx) = mpsc::channel::<Job>();
        let problem = &self.problem;
        let config = &self.config;

        std::thread::scope(|scope| {
            let solver_config = self.solver_config.clone();
            scope.spawn(move || executor(problem, solver_config, job_rx));

            for stream in self.listener.incoming() {
                if shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                if let Ok(clone) = stream.try_clone() {
                    connections.lock().expect("connection registry").push(clone);
                }
                let jobs = job_tx.clone();
                let (shutdown, connections) = (&shutdown, &connections);
                scope.spawn(move || {
                    let killed = handle_connection(stream, config, &jobs).unwrap_or(false);
                    if killed && !shutdown.swap(true, Ordering::SeqCst) {
                        for c in connections.lock().expect("connection registry").iter() {
                            let _ = c.shutdown(Shutdown::Both);
                        }
                        // wake the acceptor
                        let _ = TcpStream::connect(addr);
                    }
                });
            }
            drop(job_tx);
            for c in connections.lock().expect("connection registry").iter() {
                let _ = c.shutdown(Shutdown::Both);
            }
        });
        Ok(())
    }
}

/// Returns `Ok(true)` when the client asked the server to stop.
fn handle_connection(stream: TcpStream, config: &ServerConfig, jobs: &mpsc::Sender<Job>) -> io::Result<bool> {
    stream.set_read_timeout(config.read_timeout)?;
    let _ = stream.set_nodelay(true);
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut line = Vec::new();
    let limit = config.max_request_bytes;
    loop {
        line.clear();
        let read = (&mut reader).take(limit as u64 + 1).read_until(b'\n', &mut line)?;
        if read == 0 {
            return Ok(false);
        }
        let terminated = line.last() == Some(&b'\n');
        if terminated {
            line.pop();
            if line.last() == Some(&b'\r') {
                line.pop();
            }
        }
        if line.len() > limit {
            discard_rest_of_line(&mut reader, terminated)?;
            send_line(&mut writer, error_line(ERR_MALFORMED, format!("request exceeds {limit} bytes")))?;
            continue;
        }
        let (response, kill) = match parse_request(&line) {
            Err(err) => (err, false),
            Ok(Parsed::Ping) => (pong_line(), false),
            Ok(Parsed::Kill) => (pong_line(), true),
            Ok(Parsed::Run(request)) => {
                let (tx, rx) = mpsc::channel();
                let sent = jobs.send(Job { request, reply: tx }).is_ok();
                let reply = if sent { rx.recv().ok() } else { None };
                (reply.unwrap_or_else(|| error_line(ERR_SOLVER, "solver unavailable")), false)
            }
        };
        send_line(&mut writer, response)?;
        if kill {
            return Ok(true);
        }
    }
}

fn discard_rest_of_line(reader: &mut impl BufRead, already_terminated: bool) -> io::Result<()> {
    if already_terminated {
        return Ok(());
    }
    loop {
        let buf = reader.fill_buf()?;
        if buf.is_empty() {
            return Ok(());
        }
        if let Some(pos) = buf.iter().position(|&b| b == b'\n') {
            reader.consume(pos + 1);
            return Ok(());
        }
        let len = buf.len();
        reader.consume(len);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(status: ExitStatus) -> SolverReport {
        SolverReport {
            exit_status: status,
            num_outer_iterations: 1,
            num_inner_iterations: 1,
            last_fpr_norm: 0.0,
            delta_y_norm: 0.0,
            f2_norm: 0.0,
            penalty: 1.0,
            inner_tolerance: 1e-5,
            cost: 0.0,
            solution: vec![1.0, 2.0],
            lagrange_multipliers: vec![3.0],
            solve_time: Duration::ZERO,
        }
    }

    #[test]
    fn warm_start_examples() {
        let req = RunRequest { parameter: vec![], ..Default::default() };
        assert_eq!(warm_start_policy(None, &req, 2, 1, 7.0), (vec![0.0; 2], vec![0.0], 7.0));

        let prev = report(ExitStatus::Converged);
        assert_eq!(warm_start_policy(Some(&prev), &req, 2, 1, 7.0), (vec![1.0, 2.0], vec![3.0], 7.0));

        let with_guess = RunRequest { initial_guess: Some(vec![5.0, 6.0]), ..req.clone() };
        assert_eq!(warm_start_policy(Some(&prev), &with_guess, 2, 1, 7.0), (vec![5.0, 6.0], vec![3.0], 7.0));

        let failed = report(ExitStatus::MaxOuterIterations);
        assert_eq!(warm_start_policy(Some(&failed), &req, 2, 1, 7.0), (vec![0.0; 2], vec![0.0], 7.0));
    }

    #[test]
    fn parse_errors_have_codes() {
        let code = |line: &str| match parse_request(line.as_bytes()) {
            Err(e) => serde_json::from_str::<Value>(&e).unwrap()["Error"]["code"].as_u64().unwrap(),
            Ok(_) => 0,
        };
        assert_eq!(code("{\"Ping\": 1}"), 0);
        assert_eq!(code("not json"), 1000);
        assert_eq!(code("[1,2]"), 1000);
        assert_eq!(code("{\"Ping\": 1, \"Kill\": 1}"), 1000);
        assert_eq!(code("{\"Run\": {\"parameter\": \"x\"}}"), 1000);
        assert_eq!(code("{\"Run\": {\"parameter\": [1], \"bogus\": 2}}"), 1000);
        assert_eq!(code("{\"Launch\": 1}"), 3003);
    }

    #[test]
    fn config_invariants() {
        assert!(ServerConfig::default().validate().is_ok());
        assert!(ServerConfig { port: 0, ..Default::default() }.validate().is_err());
        assert!(ServerConfig { max_request_bytes: 100, ..Default::default() }.validate().is_err());
    }
}
