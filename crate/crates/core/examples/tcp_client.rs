//! A minimal client for the NDJSON protocol.
//!
//! Connects to a running server (see `tcp_server`), pings it, solves for a
//! few parameters, shows an error response, and finally stops the server.
//! With `--embedded` it first starts its own server on a free port.
//!
//! ```text
//! cargo run --release --example tcp_client [-- --embedded]
//! ```

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;

use panalm::bench::{rosenbrock, Encoding};
use panalm::server::{Server, ServerConfig};
use serde_json::{json, Value};

struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Client {
    fn call(&mut self, request: Value) -> std::io::Result<Value> {
        self.writer.write_all(format!("{request}\n").as_bytes())?;
        let mut line = String::new();
        self.reader.read_line(&mut line)?;
        Ok(serde_json::from_str(&line)?)
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut addr = "127.0.0.1:8333".to_string();
    let mut handle = None;
    if std::env::args().any(|a| a == "--embedded") {
        let server = Server::bind_ephemeral(rosenbrock::problem(Encoding::Alm), rosenbrock::config(), ServerConfig::default())?;
        addr = server.local_addr()?.to_string();
        handle = Some(std::thread::spawn(move || server.run()));
    }

    let stream = TcpStream::connect(&addr)?;
    stream.set_nodelay(true)?;
    let mut client = Client { reader: BufReader::new(stream.try_clone()?), writer: stream };

    println!("{}", client.call(json!({ "Ping": 1 }))?);
    for p in [[1.0, 50.0, 1.5], [1.0, 50.0, 1.6], [0.5, 20.0, 1.5]] {
        let reply = client.call(json!({ "Run": { "parameter": p } }))?;
        let s = &reply["Solution"];
        println!(
            "p = {p:?}: {} outer={} inner={} cost={}",
            s["exit_status"], s["num_outer_iterations"], s["num_inner_iterations"], s["cost"]
        );
    }
    println!("{}", client.call(json!({ "Run": { "parameter": [1.0] } }))?);
    println!("{}", client.call(json!({ "Kill": 1 }))?);

    if let Some(h) = handle {
        h.join().expect("server thread")?;
    }
    Ok(())
}
