//! Establishing a session over real sockets.
//!
//! Signaling always goes through the relay's stream connection. A
//! responder may offer a loopback TCP listener as a direct candidate; the
//! initiator checks it with a `signal.check` / `signal.check_ok` exchange
//! and keeps that connection as the direct path. Otherwise lanes 0 and 1
//! ride the relay connection.

use std::io::{self, Read};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Sender};
use gewu_protocol::{decode, encode, types, Envelope, IdGenerator, Payload};
use log::{debug, info};
use serde_json::Value;

use crate::channel::{Channel, Link, DEFAULT_BUFFER_CAPACITY};
use crate::endpoint::{Endpoint, LinkEvent};
use crate::error::TransportError;
use crate::framing::{self, FrameDecoder, Lane};
use crate::inproc::fail_error;
use crate::media::MediaSlot;
use crate::queue::InboundQueue;
use crate::session::{Candidate, Output, Path, Role, SessionConfig, SessionFsm};

#[derive(Debug, Clone)]
pub struct LiveOptions {
    /// `host:port` of the relay's stream listener.
    pub relay: String,
    pub session: String,
    pub role: Role,
    pub source: String,
    pub deadline_ms: u64,
    pub join_timeout_ms: u64,
    /// Give up waiting for a peer after this long.
    pub peer_timeout_ms: Option<u64>,
    pub coalesce: bool,
    pub buffer_capacity: usize,
    /// Responder only: offer a loopback TCP listener as a direct candidate.
    pub offer_direct: bool,
}

impl LiveOptions {
    pub fn new(relay: impl Into<String>, session: impl Into<String>, role: Role) -> Self {
        LiveOptions {
            relay: relay.into(),
            session: session.into(),
            role,
            source: match role {
                Role::Initiator => "web".into(),
                Role::Responder => "edge".into(),
            },
            deadline_ms: 1000,
            join_timeout_ms: 5000,
            peer_timeout_ms: None,
            coalesce: true,
            buffer_capacity: DEFAULT_BUFFER_CAPACITY,
            offer_direct: true,
        }
    }
}

/// Writes frames to one stream; media goes through a newest-wins slot
/// drained by a dedicated thread so a slow socket drops stale frames.
struct TcpLink {
    writer: Mutex<TcpStream>,
    media_out: Arc<MediaSlot>,
    sockets: Vec<TcpStream>,
}

impl Link for TcpLink {
    fn send(&self, lane: Lane, payload: &[u8]) -> Result<(), TransportError> {
        match lane {
            Lane::Media => {
                if self.media_out.is_closed() {
                    return Err(TransportError::SessionClosed);
                }
                self.media_out.offer(payload.to_vec());
                Ok(())
            }
            _ => {
                let mut w = self.writer.lock().unwrap();
                framing::write_frame(&mut *w, lane, payload).map_err(|e| match e {
                    TransportError::Io(_) => TransportError::SessionClosed,
                    other => other,
                })
            }
        }
    }

    fn close(&self) {
        self.media_out.close();
        for s in &self.sockets {
            let _ = s.shutdown(Shutdown::Both);
        }
    }
}

struct Guard {
    sockets: Vec<TcpStream>,
    stopping: Arc<AtomicBool>,
}

impl Drop for Guard {
    fn drop(&mut self) {
        self.stopping.store(true, Ordering::Relaxed);
        for s in &self.sockets {
            let _ = s.shutdown(Shutdown::Both);
        }
    }
}

fn resolve(addr: &str) -> Result<SocketAddr, TransportError> {
    addr.to_socket_addrs()
        .map_err(|e| TransportError::SignalingUnreachable(format!("{addr}: {e}")))?
        .next()
        .ok_or_else(|| TransportError::SignalingUnreachable(format!("{addr}: no address")))
}

fn check_env(ids: &IdGenerator, kind: &str, session: &str) -> Vec<u8> {
    let mut p = Payload::new();
    p.insert("session".into(), Value::from(session));
    encode(&Envelope::new(ids.next_id(), kind, ids.source(), 0, p)).expect("valid envelope")
}

/// Connectivity check against a responder's TCP candidate.
fn probe(addr: &str, session: &str, ids: &IdGenerator, timeout: Duration) -> Option<TcpStream> {
    let sa = resolve(addr).ok()?;
    let mut s = TcpStream::connect_timeout(&sa, timeout).ok()?;
    s.set_read_timeout(Some(timeout)).ok()?;
    let _ = s.set_nodelay(true);
    framing::write_frame(&mut s, Lane::Signaling, &check_env(ids, types::SIGNAL_CHECK, session)).ok()?;
    let (lane, body) = framing::read_frame(&mut s).ok()??;
    let env = decode(&body).ok()?;
    (lane == Lane::Signaling && env.kind == types::SIGNAL_CHECK_OK).then(|| {
        let _ = s.set_read_timeout(None);
        s
    })
}

/// Accepts checks on the responder's direct listener until stopped.
fn answer_checks(
    listener: TcpListener,
    session: String,
    ids: Arc<IdGenerator>,
    verified: Arc<Mutex<Option<TcpStream>>>,
    stop: Arc<AtomicBool>,
) {
    while !stop.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((mut s, _)) => {
                let _ = s.set_nonblocking(false);
                let _ = s.set_read_timeout(Some(Duration::from_millis(1000)));
                let _ = s.set_nodelay(true);
                let ok = matches!(framing::read_frame(&mut s), Ok(Some((Lane::Signaling, body)))
                    if decode(&body).is_ok_and(|e| e.kind == types::SIGNAL_CHECK && e.payload_str("session") == Some(&session)));
                if !ok {
                    continue;
                }
                let _ = s.set_read_timeout(None);
                if let Ok(keep) = s.try_clone() {
                    *verified.lock().unwrap() = Some(keep);
                }
                let _ = framing::write_frame(&mut s, Lane::Signaling, &check_env(&ids, types::SIGNAL_CHECK_OK, &session));
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(_) => thread::sleep(Duration::from_millis(20)),
        }
    }
}

struct Router {
    inbound: Arc<InboundQueue>,
    media: Arc<MediaSlot>,
    events: Sender<LinkEvent>,
    stopping: Arc<AtomicBool>,
}

impl Router {
    fn route(&self, lane: Lane, payload: Vec<u8>) {
        match lane {
            Lane::Control => self.inbound.push_bytes(&payload),
            Lane::Media => {
                self.media.offer(payload);
            }
            Lane::Signaling => {
                if let Ok(env) = decode(&payload) {
                    if env.kind == types::RELAY_PEER_LEFT || env.kind == types::SIGNAL_BYE {
                        let _ = self.events.send(LinkEvent::PeerLeft);
                    }
                }
            }
        }
    }

    /// Reads frames until the stream ends. `decoder` carries any bytes read
    /// during establishment.
    fn pump(&self, mut stream: TcpStream, mut decoder: FrameDecoder, eof_means_peer_left: bool) {
        let mut buf = vec![0u8; 64 * 1024];
        let reason = loop {
            loop {
                match decoder.next_frame() {
                    Ok(Some((lane, p))) => self.route(lane, p),
                    Ok(None) => break,
                    Err(e) => return self.end(e.to_string(), eof_means_peer_left),
                }
            }
            match stream.read(&mut buf) {
                Ok(0) => break "connection closed".to_string(),
                Ok(n) => decoder.push(&buf[..n]),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => break e.to_string(),
            }
        };
        self.end(reason, eof_means_peer_left);
    }

    fn end(&self, reason: String, peer_left: bool) {
        if self.stopping.load(Ordering::Relaxed) {
            return;
        }
        let ev = if peer_left {
            LinkEvent::PeerLeft
        } else {
            LinkEvent::Disconnected(reason)
        };
        let _ = self.events.send(ev);
    }
}

/// Joins the relay and runs establishment to completion.
pub fn establish(opts: &LiveOptions) -> Result<Endpoint, TransportError> {
    let relay_addr = resolve(&opts.relay)?;
    let mut relay = TcpStream::connect_timeout(&relay_addr, Duration::from_millis(opts.join_timeout_ms.max(1)))
        .map_err(|e| TransportError::SignalingUnreachable(format!("{}: {e}", opts.relay)))?;
    let _ = relay.set_nodelay(true);
    relay.set_read_timeout(Some(Duration::from_millis(10)))?;

    let ids = Arc::new(IdGenerator::new(opts.source.clone()));
    let stop_checks = Arc::new(AtomicBool::new(false));
    let verified = Arc::new(Mutex::new(None::<TcpStream>));
    let mut candidates = Vec::new();
    if opts.role == Role::Responder && opts.offer_direct {
        let l = TcpListener::bind("127.0.0.1:0")?;
        l.set_nonblocking(true)?;
        candidates.push(Candidate::new("tcp", l.local_addr()?.to_string(), 100));
        let (session, ids, verified, stop) = (opts.session.clone(), ids.clone(), verified.clone(), stop_checks.clone());
        thread::spawn(move || answer_checks(l, session, ids, verified, stop));
    }
    // Stop the check listener whichever way this function exits.
    struct StopOnDrop(Arc<AtomicBool>);
    impl Drop for StopOnDrop {
        fn drop(&mut self) {
            self.0.store(true, Ordering::Relaxed);
        }
    }
    let _stop_guard = StopOnDrop(stop_checks.clone());

    let mut cfg = SessionConfig::new(opts.session.clone(), opts.role);
    cfg.deadline_ms = opts.deadline_ms;
    cfg.join_timeout_ms = opts.join_timeout_ms;
    let mut fsm = SessionFsm::new(cfg, IdGenerator::new(opts.source.clone()), candidates);

    let started = Instant::now();
    let now = || started.elapsed().as_millis() as u64;
    let mut decoder = FrameDecoder::new();
    let mut buf = vec![0u8; 64 * 1024];
    let mut direct_stream: Option<TcpStream> = None;
    fsm.start(now());

    let path = 'establish: loop {
        while let Some(out) = fsm.poll_output() {
            match out {
                Output::Signal { bytes, .. } => {
                    framing::write_frame(&mut relay, Lane::Signaling, &bytes)
                        .map_err(|e| TransportError::SignalingUnreachable(e.to_string()))?;
                }
                Output::Check(c) => {
                    let budget = Duration::from_millis(opts.deadline_ms.clamp(50, 1000));
                    let s = (c.backend == "tcp").then(|| probe(&c.addr, &opts.session, &ids, budget)).flatten();
                    debug!("check {} → {}", c.addr, s.is_some());
                    let ok = s.is_some();
                    if ok {
                        direct_stream = s;
                    }
                    fsm.on_check_result(&c, ok, now());
                }
                Output::Connected(p) => break 'establish p,
                Output::Failed(r) => return Err(fail_error(r)),
                Output::Closed => return Err(TransportError::SessionClosed),
            }
        }
        fsm.on_timer(now());
        if fsm.phase() == crate::session::Phase::Joining {
            if let Some(limit) = opts.peer_timeout_ms {
                if now() > limit {
                    return Err(TransportError::EstablishTimeout);
                }
            }
        }
        match relay.read(&mut buf) {
            Ok(0) => return Err(TransportError::SignalingUnreachable("relay closed the connection".into())),
            Ok(n) => {
                decoder.push(&buf[..n]);
                // Only signaling is consumed here; anything after the
                // connect point stays buffered for the reader thread.
                while !fsm.phase().is_connected() && !fsm.phase().is_terminal() {
                    match decoder.next_frame()? {
                        Some((Lane::Signaling, p)) => {
                            if let Ok(env) = decode(&p) {
                                fsm.on_signal(&env, now());
                            }
                        }
                        Some(_) => {}
                        None => break,
                    }
                }
            }
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(e) => return Err(TransportError::SignalingUnreachable(e.to_string())),
        }
    };
    // Flush the selection message (and anything else queued) to the relay.
    while let Some(out) = fsm.poll_output() {
        if let Output::Signal { bytes, .. } = out {
            framing::write_frame(&mut relay, Lane::Signaling, &bytes)?;
        }
    }
    relay.set_read_timeout(None)?;
    info!("session {} connected ({:?}) in {} ms", opts.session, path, now());

    if let (Path::Direct(_), Role::Responder) = (&path, opts.role) {
        let t0 = Instant::now();
        while direct_stream.is_none() && t0.elapsed() < Duration::from_millis(1000) {
            direct_stream = verified.lock().unwrap().take();
            if direct_stream.is_none() {
                thread::sleep(Duration::from_millis(2));
            }
        }
        if direct_stream.is_none() {
            return Err(TransportError::EstablishTimeout);
        }
    }

    let inbound = Arc::new(InboundQueue::new(opts.coalesce));
    let media = Arc::new(MediaSlot::new());
    let (tx, rx) = unbounded();
    let stopping = Arc::new(AtomicBool::new(false));
    let router = Arc::new(Router {
        inbound: inbound.clone(),
        media: media.clone(),
        events: tx,
        stopping: stopping.clone(),
    });

    let mut sockets = vec![relay.try_clone()?];
    let data = match &direct_stream {
        Some(d) => {
            sockets.push(d.try_clone()?);
            let (r, d2) = (router.clone(), d.try_clone()?);
            thread::spawn(move || r.pump(d2, FrameDecoder::new(), true));
            d.try_clone()?
        }
        None => relay.try_clone()?,
    };
    let (r, relay_read) = (router.clone(), relay.try_clone()?);
    thread::spawn(move || r.pump(relay_read, decoder, false));

    let media_out = Arc::new(MediaSlot::new());
    let link = Arc::new(TcpLink {
        writer: Mutex::new(data.try_clone()?),
        media_out: media_out.clone(),
        sockets: sockets.iter().filter_map(|s| s.try_clone().ok()).collect(),
    });
    let wlink = link.clone();
    thread::spawn(move || {
        while !wlink.media_out.is_closed() {
            if let Some(frame) = wlink.media_out.take(Duration::from_millis(100)) {
                let mut w = wlink.writer.lock().unwrap();
                if framing::write_frame(&mut *w, Lane::Media, &frame).is_err() {
                    break;
                }
            }
        }
    });

    let channel = Arc::new(Channel::new(opts.buffer_capacity));
    channel.open(link)?;
    Ok(Endpoint {
        role: opts.role,
        channel,
        inbound,
        media,
        path,
        history: fsm.history().to_vec(),
        transcript: fsm.transcript(),
        events: rx,
        guard: Some(Box::new(Guard { sockets, stopping })),
    })
}
