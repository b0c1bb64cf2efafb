//! In-process backend: both peers in one address space, lossless.
//!
//! Establishment runs the real session machines through a relay core on a
//! frozen clock; the loopback candidate always verifies.

use std::sync::Arc;

use crossbeam_channel::{unbounded, Sender};
use gewu_protocol::{decode, IdGenerator};

use crate::channel::{Channel, Link, DEFAULT_BUFFER_CAPACITY};
use crate::endpoint::{Endpoint, LinkEvent};
use crate::error::TransportError;
use crate::framing::Lane;
use crate::media::MediaSlot;
use crate::queue::InboundQueue;
use crate::relay::{Delivery, RelayCore, RelayStats, DEFAULT_ROOM_TTL_MS};
use crate::session::{Candidate, FailReason, Output, Role, SessionConfig, SessionFsm};

struct InprocLink {
    inbound: Arc<InboundQueue>,
    media: Arc<MediaSlot>,
    events: Sender<LinkEvent>,
}

impl Link for InprocLink {
    fn send(&self, lane: Lane, payload: &[u8]) -> Result<(), TransportError> {
        match lane {
            Lane::Control => self.inbound.push_bytes(payload),
            Lane::Media => {
                self.media.offer(payload.to_vec());
            }
            Lane::Signaling => {}
        }
        Ok(())
    }

    fn close(&self) {
        let _ = self.events.send(LinkEvent::PeerLeft);
    }
}

#[derive(Debug, Clone)]
pub struct InprocOptions {
    pub session: String,
    pub deadline_ms: u64,
    pub coalesce: bool,
    pub buffer_capacity: usize,
}

impl Default for InprocOptions {
    fn default() -> Self {
        InprocOptions {
            session: "local".into(),
            deadline_ms: 1000,
            coalesce: true,
            buffer_capacity: DEFAULT_BUFFER_CAPACITY,
        }
    }
}

/// Two channels, created unopened so callers can exercise pre-open sends.
pub struct Unopened {
    pub initiator: Endpoint,
    pub responder: Endpoint,
    /// Relay counters after establishment.
    pub relay: RelayStats,
    links: [Arc<InprocLink>; 2],
}

/// Establishes an in-process session and returns (initiator, responder).
pub fn pair(opts: &InprocOptions) -> Result<Unopened, TransportError> {
    let mut relay = RelayCore::new(DEFAULT_ROOM_TTL_MS, IdGenerator::seeded("relay", 0));
    let members = [relay.connect(), relay.connect()];
    let mut fsms = [Role::Initiator, Role::Responder].map(|role| {
        let mut cfg = SessionConfig::new(opts.session.clone(), role);
        cfg.deadline_ms = opts.deadline_ms;
        let (source, cands) = match role {
            Role::Initiator => ("web", vec![]),
            Role::Responder => ("edge", vec![Candidate::new("inproc", "inproc:responder", 200)]),
        };
        SessionFsm::new(cfg, IdGenerator::seeded(source, 0), cands)
    });
    for f in &mut fsms {
        f.start(0);
    }
    let mut paths = [None, None];
    loop {
        let mut progressed = false;
        for i in 0..2 {
            while let Some(out) = fsms[i].poll_output() {
                progressed = true;
                match out {
                    Output::Signal { bytes, .. } => {
                        for d in relay.on_frame(members[i], Lane::Signaling, &bytes, 0) {
                            if let Delivery::To(m, Lane::Signaling, b) = d {
                                let j = if m == members[0] { 0 } else { 1 };
                                if let Ok(env) = decode(&b) {
                                    fsms[j].on_signal(&env, 0);
                                }
                            }
                        }
                    }
                    Output::Check(c) => fsms[i].on_check_result(&c, true, 0),
                    Output::Connected(p) => paths[i] = Some(p),
                    Output::Failed(r) => return Err(fail_error(r)),
                    Output::Closed => return Err(TransportError::SessionClosed),
                }
            }
        }
        if !progressed {
            break;
        }
    }
    let [Some(pa), Some(pb)] = paths else {
        return Err(TransportError::EstablishTimeout);
    };

    let mk = |role, path, fsm: &SessionFsm| {
        let (tx, rx) = unbounded();
        let ep = Endpoint {
            role,
            channel: Arc::new(Channel::new(opts.buffer_capacity)),
            inbound: Arc::new(InboundQueue::new(opts.coalesce)),
            media: Arc::new(MediaSlot::new()),
            path,
            history: fsm.history().to_vec(),
            transcript: fsm.transcript(),
            events: rx,
            guard: None,
        };
        (ep, tx)
    };
    let (initiator, a_tx) = mk(Role::Initiator, pa, &fsms[0]);
    let (responder, b_tx) = mk(Role::Responder, pb, &fsms[1]);
    let links = [
        Arc::new(InprocLink {
            inbound: responder.inbound.clone(),
            media: responder.media.clone(),
            events: b_tx,
        }),
        Arc::new(InprocLink {
            inbound: initiator.inbound.clone(),
            media: initiator.media.clone(),
            events: a_tx,
        }),
    ];
    Ok(Unopened {
        initiator,
        responder,
        relay: relay.stats(),
        links,
    })
}

impl Unopened {
    /// Opens both control channels, flushing anything sent so far.
    /// Returns the flushed counts (initiator, responder).
    pub fn open(&self) -> Result<(usize, usize), TransportError> {
        let a = self.initiator.channel.open(self.links[0].clone())?;
        let b = self.responder.channel.open(self.links[1].clone())?;
        Ok((a, b))
    }

    pub fn into_endpoints(self) -> (Endpoint, Endpoint) {
        (self.initiator, self.responder)
    }
}

/// Establishes and opens an in-process session.
pub fn connect(opts: &InprocOptions) -> Result<(Endpoint, Endpoint, RelayStats), TransportError> {
    let u = pair(opts)?;
    u.open()?;
    let relay = u.relay.clone();
    let (a, b) = u.into_endpoints();
    Ok((a, b, relay))
}

pub(crate) fn fail_error(r: FailReason) -> TransportError {
    match r {
        FailReason::SignalingUnreachable => TransportError::SignalingUnreachable("no answer to join".into()),
        FailReason::EstablishTimeout | FailReason::PeerLeft => TransportError::EstablishTimeout,
        FailReason::RelayRefused { code, message } => TransportError::Relay { code, message },
    }
}
