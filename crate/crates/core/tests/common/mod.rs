#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::thread::JoinHandle;

use nalgebra::{DMatrix, DVector};
use panalm::server::{Server, ServerConfig, ServerError};
use panalm::{ConstraintSet, InnerOracle, ProblemDefinition, SolverConfig, SolverReport};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense inverse-Hessian BFGS recursion starting from `h0·I`:
/// `H⁺ = (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ`.
pub fn dense_bfgs_inverse(n: usize, h0: f64, pairs: &[(Vec<f64>, Vec<f64>)]) -> DMatrix<f64> {
    let mut h = DMatrix::<f64>::identity(n, n) * h0;
    let id = DMatrix::<f64>::identity(n, n);
    for (s, y) in pairs {
        let s = DVector::from_column_slice(s);
        let y = DVector::from_column_slice(y);
        let rho = 1.0 / s.dot(&y);
        let left = &id - rho * &s * y.transpose();
        let right = &id - rho * &y * s.transpose();
        h = left * h * right + rho * &s * s.transpose();
    }
    h
}

/// Equality-constrained convex quadratic `min ½uᵀQu + qᵀu  s.t. Au = b`
/// with its KKT pair from the linear system
/// `[Q Aᵀ; A 0] [u; y] = [−q; b]`.
pub struct KktInstance {
    pub q_mat: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub u_star: DVector<f64>,
    pub y_star: DVector<f64>,
}

pub fn random_kkt_instance(seed: u64) -> KktInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=5);
    let m = rng.gen_range(1..=3.min(n - 1));
    loop {
        let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let q_mat = &g * g.transpose() + DMatrix::identity(n, n) * 0.5;
        let q = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
        let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
        let b = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
        let sv = a.clone().svd(false, false).singular_values;
        if sv.min() < 0.2 {
            continue;
        }
        let mut k = DMatrix::zeros(n + m, n + m);
        k.view_mut((0, 0), (n, n)).copy_from(&q_mat);
        k.view_mut((0, n), (n, m)).copy_from(&a.transpose());
        k.view_mut((n, 0), (m, n)).copy_from(&a);
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&(-&q));
        rhs.rows_mut(n, m).copy_from(&b);
        let sol = k.lu().solve(&rhs).expect("KKT matrix is nonsingular");
        return KktInstance {
            u_star: sol.rows(0, n).into_owned(),
            y_star: sol.rows(n, m).into_owned(),
            q_mat,
            q,
            a,
            b,
        };
    }
}

impl KktInstance {
    pub fn problem(&self) -> ProblemDefinition {
        let n = self.q.len();
        let m = self.b.len();
        let (qm, qv) = (self.q_mat.clone(), self.q.clone());
        let (qm2, qv2) = (self.q_mat.clone(), self.q.clone());
        let (a1, b1, a2) = (self.a.clone(), self.b.clone(), self.a.clone());
        ProblemDefinition::new(
            n,
            0,
            move |u, _| {
                let u = DVector::from_column_slice(u);
                0.5 * u.dot(&(&qm * &u)) + qv.dot(&u)
            },
            move |u, _, g| {
                let u = DVector::from_column_slice(u);
                g.copy_from_slice((&qm2 * u + &qv2).as_slice());
            },
            ConstraintSet::WholeSpace,
        )
        .with_aug_lagrangian_constraints(
            m,
            move |u, _, out| out.copy_from_slice((&a1 * DVector::from_column_slice(u) - &b1).as_slice()),
            move |_, _, w, out| out.copy_from_slice((a2.transpose() * DVector::from_column_slice(w)).as_slice()),
            ConstraintSet::Zero,
        )
    }
}

/// Largest violation of `|∇ψ − fd| ≤ max(1e-6, tol·‖∇ψ‖∞)` expressed as the
/// ratio `|∇ψ − fd| / max(1e-6/tol, ‖∇ψ‖∞)` over `points` random points.
/// Central differences use step `1e-6·max(1, |uᵢ|)`.
pub fn psi_fd_relative_error(problem: &ProblemDefinition, p: &[f64], c: f64, scale: f64, points: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<f64> = (0..problem.n1).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut oracle = InnerOracle::new(problem, p, c, &y).unwrap();
    let mut g = vec![0.0; problem.n];
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let u: Vec<f64> = (0..problem.n).map(|_| rng.gen_range(-scale..scale)).collect();
        oracle.grad_psi(&u, &mut g).unwrap();
        let mut x = u.clone();
        let mut err: f64 = 0.0;
        for i in 0..problem.n {
            let h = 1e-6 * u[i].abs().max(1.0);
            x[i] = u[i] + h;
            let fp = oracle.psi(&x).unwrap();
            x[i] = u[i] - h;
            let fm = oracle.psi(&x).unwrap();
            x[i] = u[i];
            err = err.max(((fp - fm) / (2.0 * h) - g[i]).abs());
        }
        let gnorm = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        worst = worst.max(err / gnorm.max(1.0));
    }
    worst
}

pub fn start_server(problem: ProblemDefinition, config: SolverConfig) -> (SocketAddr, JoinHandle<Result<(), ServerError>>) {
    let server = Server::bind_ephemeral(problem, config, ServerConfig::default()).expect("bind");
    let addr = server.local_addr().unwrap();
    (addr, std::thread::spawn(move || server.run()))
}

pub struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Client {
    pub fn connect(addr: SocketAddr) -> Client {
        let stream = TcpStream::connect(addr).expect("connect");
        stream.set_read_timeout(Some(std::time::Duration::from_secs(60))).unwrap();
        stream.set_nodelay(true).unwrap();
        Client { reader: BufReader::new(stream.try_clone().unwrap()), writer: stream }
    }

    pub fn send_raw(&mut self, line: &[u8]) {
        let mut buf = Vec::with_capacity(line.len() + 1);
        buf.extend_from_slice(line);
        buf.push(b'\n');
        self.writer.write_all(&buf).unwrap();
    }

    /// Next response line; empty at end of stream.
    pub fn recv(&mut self) -> String {
        let mut line = String::new();
        self.reader.read_line(&mut line).expect("read response");
        line
    }

    pub fn call_raw(&mut self, line: &[u8]) -> serde_json::Value {
        self.send_raw(line);
        let reply = self.recv();
        serde_json::from_str(&reply).unwrap_or_else(|e| panic!("bad response {reply:?}: {e}"))
    }

    pub fn call(&mut self, request: serde_json::Value) -> serde_json::Value {
        self.call_raw(request.to_string().as_bytes())
    }

    pub fn stream(&self) -> &TcpStream {
        &self.writer
    }
}

pub fn error_code(reply: &serde_json::Value) -> Option<u64> {
    reply.get("Error")?.get("code")?.as_u64()
}

/// One random request line without newlines: raw bytes, JSON-ish noise or a
/// mutated valid request. Never produces a `Kill`.
pub fn fuzz_line(rng: &mut ChaCha8Rng, n_p: usize) -> Vec<u8> {
    let templates = [
        r#"{"Ping": 1}"#.to_string(),
        format!(r#"{{"Run": {{"parameter": {:?}}}}}"#, vec![1.0; n_p]),
        format!(r#"{{"Run": {{"parameter": {:?}, "initial_penalty": 10.0}}}}"#, vec![0.5; n_p]),
        r#"{"Run": {"parameter": [1e308, -1e308, 0], "initial_guess": [1, 2]}}"#.to_string(),
        r#"{"Run": {"parameter": "abc"}}"#.to_string(),
        r#"{"Solve": [1, 2, 3]}"#.to_string(),
        r#"[{"Ping": 1}]"#.to_string(),
    ];
    let mut line: Vec<u8> = match rng.gen_range(0..4) {
        0 => (0..rng.gen_range(0..200)).map(|_| rng.gen::<u8>()).collect(),
        1 => {
            let alphabet = br#"{}[]":,0123456789.eE-+ abcPingRunKil"#;
            (0..rng.gen_range(0..120)).map(|_| *alphabet.choose(rng).unwrap()).collect()
        }
        _ => {
            let mut t = templates.choose(rng).unwrap().clone().into_bytes();
            for _ in 0..rng.gen_range(0..4) {
                if t.is_empty() {
                    break;
                }
                let i = rng.gen_range(0..t.len());
                match rng.gen_range(0..3) {
                    0 => t[i] = rng.gen(),
                    1 => {
                        t.remove(i);
                    }
                    _ => t.insert(i, rng.gen()),
                }
            }
            t
        }
    };
    line.retain(|&b| b != b'\n' && b != b'\r');
    if String::from_utf8_lossy(&line).contains("Kill") {
        line.clear();
    }
    line
}

/// A converged report must satisfy the tolerances it claims.
pub fn assert_report_invariants(report: &SolverReport, config: &SolverConfig) {
    if report.is_converged() {
        assert!(report.last_fpr_norm <= config.epsilon, "fpr {} > ε {}", report.last_fpr_norm, config.epsilon);
        assert!(report.f2_norm <= config.delta, "‖F2‖ {} > δ {}", report.f2_norm, config.delta);
        assert!(
            report.delta_y_norm <= report.penalty * config.delta,
            "z {} > c·δ {}",
            report.delta_y_norm,
            report.penalty * config.delta
        );
    }
    assert!(report.solution.iter().all(|v| v.is_finite()));
}
