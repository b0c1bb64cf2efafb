//! The edge node: scenes, streamer and transport for one session.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use clap::Parser;
use gewu_edge::serve::{self, ServeOptions};
use gewu_edge::{logging, offline, EdgeConfig, EdgeError, EdgeOptions, EventLog, Script};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "gewu-edge", version, about = "Run the edge node")]
struct Args {
    /// Relay stream address, host:port.
    #[arg(long)]
    relay: Option<String>,
    #[arg(long, default_value = "default")]
    session: String,
    /// Scene made Active at boot; otherwise none until the first scene.load.
    #[arg(long)]
    default_scene: Option<String>,
    /// TOML config file.
    #[arg(long, env = "GEWU_CONFIG")]
    config: Option<PathBuf>,
    /// Use the in-process backend on a virtual clock (needs --script).
    #[arg(long)]
    offline: bool,
    /// Command script to replay in offline mode.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Divide the curriculum breakpoints by this factor.
    #[arg(long)]
    compress: Option<u64>,
    #[arg(long)]
    fps: Option<u32>,
    /// Event log file (JSON lines). Offline runs default to stdout.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value = "info")]
    log_level: String,
}

fn run(args: Args) -> Result<(), EdgeError> {
    let cfg = match &args.config {
        Some(p) => EdgeConfig::load(p)?,
        None => EdgeConfig::default(),
    };
    let opts = EdgeOptions {
        seed: args.seed,
        compress: args.compress,
        default_scene: args.default_scene.clone(),
        fps: args.fps,
        stream: true,
    };
    let log = match &args.log {
        Some(p) => EventLog::create(p)?,
        None if args.offline => EventLog::to_writer(std::io::stdout()),
        None => EventLog::sink(),
    };
    if args.offline {
        let path = args
            .script
            .as_ref()
            .ok_or_else(|| EdgeError::BadConfig("--offline needs --script".into()))?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| EdgeError::BadConfig(format!("{}: {e}", path.display())))?;
        let script = Script::parse(&text)?;
        let r = offline::run(&cfg, &opts, &script, &log)?;
        log::info!(
            "offline run done: {} ms virtual, {} frames, {} envelopes",
            r.virtual_ms,
            r.frames.len(),
            r.received.len()
        );
        return Ok(());
    }
    let relay = args
        .relay
        .clone()
        .ok_or_else(|| EdgeError::BadConfig("--relay is required unless --offline".into()))?;
    serve::run(&cfg, &opts, &ServeOptions::new(relay, args.session.clone()), &log, Arc::new(AtomicBool::new(false)))
}

fn main() -> ExitCode {
    let args = Args::parse();
    logging::init(logging::parse_level(&args.log_level).unwrap_or(log::LevelFilter::Info));
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "level": "error", "msg": e.to_string(), "exit": e.exit_code() }));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
