//! Headless scripted client for end-to-end runs without a browser.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use gewu_edge::client::{self, ClientOptions};
use gewu_edge::{logging, EdgeError, Script};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "gewu-client", version, about = "Play a command script against a live edge")]
struct Args {
    #[arg(long)]
    relay: String,
    #[arg(long, default_value = "default")]
    session: String,
    #[arg(long)]
    script: PathBuf,
    /// Where frames.txt, telemetry.jsonl and received.jsonl go.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    peer_timeout_ms: u64,
    #[arg(long, default_value_t = 500)]
    linger_ms: u64,
    #[arg(long, default_value = "info")]
    log_level: String,
}

fn run(args: &Args) -> Result<(), EdgeError> {
    let text = std::fs::read_to_string(&args.script)
        .map_err(|e| EdgeError::BadConfig(format!("{}: {e}", args.script.display())))?;
    let script = Script::parse(&text)?;
    let mut opts = ClientOptions::new(args.relay.clone(), args.session.clone(), args.out.clone());
    opts.peer_timeout_ms = args.peer_timeout_ms;
    opts.linger_ms = args.linger_ms;
    let r = client::run(&opts, &script)?;
    log::info!(
        "script complete: {} frames, {} envelopes, {} protocol errors",
        r.frames.len(),
        r.received.len(),
        r.protocol_errors
    );
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    logging::init(logging::parse_level(&args.log_level).unwrap_or(log::LevelFilter::Info));
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "level": "error", "msg": e.to_string(), "exit": e.exit_code() }));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
