//! Serving the Rosenbrock problem over TCP.
//!
//! Starts a server on 127.0.0.1:8333 and blocks until a client sends
//! `{"Kill": 1}`. Pair it with the `tcp_client` example, or with netcat:
//!
//! ```text
//! cargo run --release --example tcp_server
//! echo '{"Run": {"parameter": [1.0, 50.0, 1.5]}}' | nc 127.0.0.1 8333
//! ```

use panalm::bench::{rosenbrock, Encoding};
use panalm::server::{Server, ServerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let server = Server::bind(rosenbrock::problem(Encoding::Alm), rosenbrock::config(), ServerConfig::default())?;
    println!("listening on {}", server.local_addr()?);
    server.run()?;
    println!("server stopped");
    Ok(())
}
