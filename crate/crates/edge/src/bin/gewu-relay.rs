//! The signaling relay: stream listener, optional WebSocket bridge and
//! health endpoint.

use std::net::{IpAddr, SocketAddr};
use std::process::ExitCode;

use clap::Parser;
use gewu_edge::logging;
use gewu_transport::{RelayServer, RelayServerConfig};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "gewu-relay", version, about = "Run the signaling relay")]
struct Args {
    #[arg(long, default_value = "127.0.0.1")]
    bind: IpAddr,
    #[arg(long, default_value_t = 7700)]
    port: u16,
    /// Plain-HTTP health and counters.
    #[arg(long)]
    health_port: Option<u16>,
    /// WebSocket bridge for browsers.
    #[arg(long)]
    ws_port: Option<u16>,
    /// Rooms idle this long are closed.
    #[arg(long, default_value_t = 600)]
    room_ttl_s: u64,
    #[arg(long, default_value = "info")]
    log_level: String,
}

fn main() -> ExitCode {
    let args = Args::parse();
    logging::init(logging::parse_level(&args.log_level).unwrap_or(log::LevelFilter::Info));
    let at = |port| SocketAddr::new(args.bind, port);
    let cfg = RelayServerConfig {
        listen: at(args.port),
        health: args.health_port.map(at),
        websocket: args.ws_port.map(at),
        room_ttl_ms: args.room_ttl_s.saturating_mul(1000).max(1),
    };
    match RelayServer::start(cfg) {
        Ok(server) => {
            log::info!(
                "relay listening on {} (health {:?}, websocket {:?})",
                server.addr(),
                server.health_addr(),
                server.ws_addr()
            );
            server.wait();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({ "level": "error", "msg": format!("relay failed to start: {e}") }));
            ExitCode::FAILURE
        }
    }
}
