//! The live edge: one session through a relay, re-established whenever the
//! peer goes away, while the scene loop keeps ticking on the wall clock.

use std::net::{TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, Receiver, TryRecvError};
use gewu_transport::live::{self, LiveOptions};
use gewu_transport::{Endpoint, LinkEvent, Role, TransportError};
use log::{info, warn};
use serde_json::json;

use crate::app::{EdgeApp, EdgeOptions};
use crate::config::EdgeConfig;
use crate::logging::EventLog;
use crate::EdgeError;

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub relay: String,
    pub session: String,
    /// Per-attempt wait for the client before rejoining.
    pub peer_timeout_ms: u64,
    pub deadline_ms: u64,
    /// Pause between failed attempts.
    pub retry_ms: u64,
}

impl ServeOptions {
    pub fn new(relay: impl Into<String>, session: impl Into<String>) -> Self {
        ServeOptions {
            relay: relay.into(),
            session: session.into(),
            peer_timeout_ms: 30_000,
            deadline_ms: 1000,
            retry_ms: 250,
        }
    }
}

fn probe_relay(addr: &str) -> Result<(), EdgeError> {
    let unreachable = |m: String| EdgeError::RelayUnreachable(format!("{addr}: {m}"));
    let addrs: Vec<_> = addr.to_socket_addrs().map_err(|e| unreachable(e.to_string()))?.collect();
    let mut last = String::from("no address");
    for a in addrs {
        match TcpStream::connect_timeout(&a, Duration::from_secs(2)) {
            Ok(_) => return Ok(()),
            Err(e) => last = e.to_string(),
        }
    }
    Err(unreachable(last))
}

fn spawn_attempt(opts: LiveOptions, delay: Duration) -> Receiver<Result<Endpoint, TransportError>> {
    let (tx, rx) = bounded(1);
    thread::spawn(move || {
        thread::sleep(delay);
        let _ = tx.send(live::establish(&opts));
    });
    rx
}

/// Serves until `stop` is set. Fails only if the relay cannot be reached
/// at startup; later outages are retried.
pub fn run(
    cfg: &EdgeConfig,
    opts: &EdgeOptions,
    sopts: &ServeOptions,
    log: &EventLog,
    stop: Arc<AtomicBool>,
) -> Result<(), EdgeError> {
    probe_relay(&sopts.relay)?;
    let started = Instant::now();
    let now = || started.elapsed().as_millis() as u64;
    let mut app = EdgeApp::new(cfg, opts, 0)?;
    log.record(0, "boot", json!({ "active": app.active_name(), "session": sopts.session }));

    let mut lopts = LiveOptions::new(sopts.relay.clone(), sopts.session.clone(), Role::Responder);
    lopts.deadline_ms = sopts.deadline_ms;
    lopts.peer_timeout_ms = Some(sopts.peer_timeout_ms);
    let mut pending = Some(spawn_attempt(lopts.clone(), Duration::ZERO));
    let mut endpoint: Option<Endpoint> = None;
    let mut sessions = 0u64;

    while !stop.load(Ordering::Relaxed) {
        let t = now();
        if let Some(rx) = &pending {
            match rx.try_recv() {
                Ok(Ok(ep)) => {
                    sessions += 1;
                    info!("session {} connected via {:?}", sopts.session, ep.path);
                    log.record(t, "connected", json!({ "path": format!("{:?}", ep.path), "n": sessions }));
                    endpoint = Some(ep);
                    pending = None;
                }
                Ok(Err(e)) => {
                    let quiet = matches!(e, TransportError::EstablishTimeout);
                    if !quiet {
                        warn!("establishment failed: {e}");
                    }
                    log.record(t, "establish_failed", json!({ "error": e.to_string() }));
                    pending = Some(spawn_attempt(lopts.clone(), Duration::from_millis(sopts.retry_ms)));
                }
                Err(TryRecvError::Empty) => {}
                Err(TryRecvError::Disconnected) => {
                    pending = Some(spawn_attempt(lopts.clone(), Duration::from_millis(sopts.retry_ms)));
                }
            }
        }

        let mut lost = None;
        if let Some(ep) = &endpoint {
            if let Ok(ev) = ep.events.try_recv() {
                lost = Some(ev);
            } else {
                app.ingest(ep.inbound.poll(usize::MAX), t);
            }
        }
        if let Some(ev) = lost {
            info!("session ended: {ev:?}; waiting for a new peer");
            log.record(t, "session_ended", json!({ "reason": match ev {
                LinkEvent::PeerLeft => "peer_left".to_string(),
                LinkEvent::Disconnected(m) => m,
            }}));
            endpoint = None;
            pending = Some(spawn_attempt(lopts.clone(), Duration::from_millis(sopts.retry_ms)));
        }

        let out = app.advance_to(t, endpoint.is_some());
        if let Some(ep) = &endpoint {
            for env in &out.envelopes {
                if let Err(e) = ep.channel.send(env) {
                    warn!("send {}: {e}", env.kind);
                }
            }
            if let Some((_, frame)) = out.frame {
                let _ = ep.channel.send_media(&frame);
            }
        }
        if let Some(ep) = &endpoint {
            ep.inbound.wait(Duration::from_millis(4));
        } else {
            thread::sleep(Duration::from_millis(4));
        }
    }
    log.record(now(), "stopped", json!({ "sessions": sessions, "ticks": app.stats().ticks }));
    log.flush();
    Ok(())
}
