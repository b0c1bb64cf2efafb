//! A headless client that stands in for the browser: joins a session,
//! plays a script, and records what comes back.
//!
//! Output files in `out_dir`:
//! - `frames.txt`: one received frame seq per line
//! - `telemetry.jsonl`: every `telemetry.*` envelope
//! - `received.jsonl`: every envelope received

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use gewu_protocol::{types, Envelope, IdGenerator};
use gewu_stream::decode_header;
use gewu_transport::live::{self, LiveOptions};
use gewu_transport::{LinkEvent, MediaReceiver, Role};
use log::{info, warn};
use serde_json::json;

use crate::logging::EventLog;
use crate::script::{Cursor, Script};
use crate::EdgeError;

#[derive(Debug, Clone)]
pub struct ClientOptions {
    pub relay: String,
    pub session: String,
    pub out_dir: PathBuf,
    /// How long to wait for the edge to join.
    pub peer_timeout_ms: u64,
    /// Keep listening this long after the last step.
    pub linger_ms: u64,
}

impl ClientOptions {
    pub fn new(relay: impl Into<String>, session: impl Into<String>, out_dir: impl Into<PathBuf>) -> Self {
        ClientOptions {
            relay: relay.into(),
            session: session.into(),
            out_dir: out_dir.into(),
            peer_timeout_ms: 10_000,
            linger_ms: 500,
        }
    }
}

#[derive(Debug, Default)]
pub struct ClientReport {
    pub frames: Vec<u32>,
    pub received: Vec<Envelope>,
    /// `protocol.error` replies: logged, not failures.
    pub protocol_errors: usize,
}

pub fn run(opts: &ClientOptions, script: &Script) -> Result<ClientReport, EdgeError> {
    std::fs::create_dir_all(&opts.out_dir)?;
    let mut lopts = LiveOptions::new(opts.relay.clone(), opts.session.clone(), Role::Initiator);
    lopts.peer_timeout_ms = Some(opts.peer_timeout_ms);
    lopts.coalesce = false;
    let ep = live::establish(&lopts)?;
    info!("client connected via {:?}", ep.path);

    let mut frames_out = BufWriter::new(File::create(opts.out_dir.join("frames.txt"))?);
    let telemetry = EventLog::create(&opts.out_dir.join("telemetry.jsonl"))?;
    let received = EventLog::create(&opts.out_dir.join("received.jsonl"))?;
    let ids = IdGenerator::new("web");
    let started = Instant::now();
    let now = || started.elapsed().as_millis() as u64;
    let mut cursor = Cursor::new(script, 0);
    let mut filter = MediaReceiver::new();
    let mut report = ClientReport::default();
    let mut done_at = None;

    loop {
        let t = now();
        if let Ok(ev) = ep.events.try_recv() {
            let why = match ev {
                LinkEvent::PeerLeft => "edge left the session".to_string(),
                LinkEvent::Disconnected(m) => m,
            };
            return Err(EdgeError::SessionLost(why));
        }
        for (kind, payload) in cursor.due(t) {
            let env = Envelope::new(ids.next_id(), kind, ids.source(), t, payload);
            ep.channel.send(&env)?;
        }
        for env in ep.inbound.poll(usize::MAX).envelopes {
            if env.kind == types::PROTOCOL_ERROR {
                report.protocol_errors += 1;
                warn!("protocol.error: {}", serde_json::Value::Object(env.payload.clone()));
            }
            if env.kind.starts_with("telemetry.") {
                telemetry.envelope(&env);
            }
            received.envelope(&env);
            report.received.push(env);
        }
        if let Some(frame) = ep.media.try_take() {
            match decode_header(&frame) {
                Ok(h) if filter.accept(h.seq) => {
                    writeln!(frames_out, "{}", h.seq)?;
                    report.frames.push(h.seq);
                }
                Ok(_) => {}
                Err(e) => received_bad_frame(&received, t, &e.to_string()),
            }
        }
        if done_at.is_none() && cursor.finished(t) {
            done_at = Some(t);
        }
        if done_at.is_some_and(|d| t >= d + opts.linger_ms) {
            break;
        }
        ep.inbound.wait(Duration::from_millis(5));
    }
    frames_out.flush()?;
    telemetry.flush();
    received.flush();
    ep.close();
    Ok(report)
}

fn received_bad_frame(log: &EventLog, t: u64, err: &str) {
    log.record(t, "bad_frame", json!({ "error": err }));
}
