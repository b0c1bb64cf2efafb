//! `--offline`: the edge and a scripted client joined in-process, on a
//! virtual clock, so a script of any length replays in moments.

use gewu_protocol::{Envelope, IdGenerator};
use gewu_stream::frame_seq;
use gewu_transport::inproc::{self, InprocOptions};
use serde_json::json;

use crate::app::{AppStats, EdgeApp, EdgeOptions, TICK_MS};
use crate::config::EdgeConfig;
use crate::logging::EventLog;
use crate::script::{Cursor, Script};
use crate::EdgeError;

#[derive(Debug, Default)]
pub struct OfflineReport {
    /// Seq of every frame the client received, in arrival order.
    pub frames: Vec<u32>,
    /// Every envelope the client received.
    pub received: Vec<Envelope>,
    pub virtual_ms: u64,
    pub stats: AppStats,
    pub active: Option<String>,
}

impl OfflineReport {
    pub fn count(&self, kind: &str) -> usize {
        self.received.iter().filter(|e| e.kind == kind).count()
    }
}

/// Time allowed after the last script step for replies to drain.
pub const LINGER_MS: u64 = 500;

/// Replays `script` and writes one log record per received envelope and
/// frame.
pub fn run(cfg: &EdgeConfig, opts: &EdgeOptions, script: &Script, log: &EventLog) -> Result<OfflineReport, EdgeError> {
    let iopts = InprocOptions {
        session: "offline".into(),
        coalesce: false,
        ..InprocOptions::default()
    };
    let (client, edge, _) = inproc::connect(&iopts)?;
    let mut app = EdgeApp::new(cfg, opts, 0)?;
    let ids = IdGenerator::seeded("web", opts.seed ^ 0x5C1);
    let mut cursor = Cursor::new(script, 0);
    let mut report = OfflineReport::default();
    log.record(0, "boot", json!({ "active": app.active_name() }));

    let mut tick: u64 = 0;
    let mut done_at = None;
    loop {
        let now = (tick as f64 * TICK_MS) as u64;
        for (kind, payload) in cursor.due(now) {
            let env = Envelope::new(ids.next_id(), kind, ids.source(), now, payload);
            log.record(now, "sent", json!({ "type": env.kind, "id": env.id, "payload": env.payload }));
            client.channel.send(&env)?;
        }
        app.ingest(edge.inbound.poll(usize::MAX), now);
        let out = app.advance_to(now, true);
        for env in &out.envelopes {
            edge.channel.send(env)?;
        }
        if let Some((_, bytes)) = out.frame {
            edge.channel.send_media(&bytes)?;
        }
        for env in client.inbound.poll(usize::MAX).envelopes {
            log.record(now, &env.kind, json!({ "id": env.id, "payload": env.payload }));
            report.received.push(env);
        }
        if let Some(seq) = client.media.try_take().as_deref().and_then(frame_seq) {
            log.record(now, "frame", json!({ "seq": seq }));
            report.frames.push(seq);
        }
        if done_at.is_none() && cursor.finished(now) {
            done_at = Some(now);
        }
        if done_at.is_some_and(|d| now >= d + LINGER_MS) {
            report.virtual_ms = now;
            break;
        }
        tick += 1;
    }
    report.stats = app.stats();
    report.active = app.active_name().map(String::from);
    log.record(report.virtual_ms, "done", json!({
        "active": report.active,
        "frames": report.frames.len(),
        "received": report.received.len(),
    }));
    log.flush();
    Ok(report)
}
