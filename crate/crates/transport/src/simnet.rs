//! Two peers, a relay and an adverse network, all on one virtual clock.
//!
//! The relay core handles a frame at the instant it is sent; the harness
//! then schedules its arrival at the destination peer. On a direct path
//! frames skip the relay entirely. The control lane runs over the
//! ack/retransmit layer, so harness loss on lane 0 is repaired while lane 1
//! stays best-effort.

use std::sync::{Arc, Mutex};

use gewu_protocol::{decode, IdGenerator};

use crate::channel::{Channel, Link, DEFAULT_BUFFER_CAPACITY};
use crate::error::TransportError;
use crate::framing::Lane;
use crate::harness::{HarnessError, NetHarness, NetProfile};
use crate::media::MediaReceiver;
use crate::queue::InboundQueue;
use crate::relay::{Delivery, MemberId, RelayCore, DEFAULT_ROOM_TTL_MS};
use crate::reliable::{ReliableReceiver, ReliableSender, Segment};
use crate::session::{Candidate, Output, Path, Phase, Role, SessionConfig, SessionFsm};

/// Extracts a frame's sequence number for the stale-frame filter.
pub type SeqFn = fn(&[u8]) -> Option<u32>;

/// Default: the first four bytes, big-endian.
pub fn leading_seq(frame: &[u8]) -> Option<u32> {
    frame.get(..4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

#[derive(Debug, Clone)]
pub struct SimNetConfig {
    pub profile: NetProfile,
    pub session: String,
    pub deadline_ms: u64,
    pub rto_ms: u64,
    pub buffer_capacity: usize,
    pub coalesce: bool,
    pub initiator_candidates: Vec<Candidate>,
    pub responder_candidates: Vec<Candidate>,
    pub media_seq: SeqFn,
}

impl SimNetConfig {
    pub fn new(profile: NetProfile) -> Self {
        SimNetConfig {
            profile,
            session: "sim".into(),
            deadline_ms: 1000,
            rto_ms: 200,
            buffer_capacity: DEFAULT_BUFFER_CAPACITY,
            coalesce: true,
            initiator_candidates: Vec::new(),
            responder_candidates: vec![Candidate::new("sim", "edge:9000", 100)],
            media_seq: leading_seq,
        }
    }
}

/// Frames a peer's channel handed to the network.
#[derive(Default)]
struct Outbox(Mutex<Vec<(Lane, Vec<u8>)>>);

struct SimLink(Arc<Outbox>);

impl Link for SimLink {
    fn send(&self, lane: Lane, payload: &[u8]) -> Result<(), TransportError> {
        self.0 .0.lock().unwrap().push((lane, payload.to_vec()));
        Ok(())
    }
}

pub struct SimPeer {
    pub fsm: SessionFsm,
    pub channel: Channel,
    pub inbound: InboundQueue,
    pub media: MediaReceiver,
    /// Sequence numbers accepted by the stale-frame filter, in order.
    pub media_log: Vec<u32>,
    outbox: Arc<Outbox>,
    sender: ReliableSender,
    receiver: ReliableReceiver,
    member: MemberId,
}

impl SimPeer {
    fn new(cfg: &SimNetConfig, role: Role, member: MemberId) -> Self {
        let (source, candidates) = match role {
            Role::Initiator => ("web", cfg.initiator_candidates.clone()),
            Role::Responder => ("edge", cfg.responder_candidates.clone()),
        };
        let mut scfg = SessionConfig::new(cfg.session.clone(), role);
        scfg.deadline_ms = cfg.deadline_ms;
        let ids = IdGenerator::seeded(source, cfg.profile.seed ^ role as u64);
        SimPeer {
            fsm: SessionFsm::new(scfg, ids, candidates),
            channel: Channel::new(cfg.buffer_capacity),
            inbound: InboundQueue::new(cfg.coalesce),
            media: MediaReceiver::new(),
            media_log: Vec::new(),
            outbox: Arc::new(Outbox::default()),
            sender: ReliableSender::new(cfg.rto_ms),
            receiver: ReliableReceiver::new(),
            member,
        }
    }

    pub fn phase(&self) -> Phase {
        self.fsm.phase()
    }

    /// Control messages still waiting for an ack.
    pub fn unacked(&self) -> usize {
        self.sender.in_flight()
    }

    pub fn retransmissions(&self) -> u64 {
        self.sender.resent()
    }
}

/// A frame in flight to one peer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub to: Role,
    pub bytes: Vec<u8>,
}

struct PendingCheck {
    at: u64,
    ok: bool,
    candidate: Candidate,
}

pub struct SimWorld {
    cfg: SimNetConfig,
    now: u64,
    net: NetHarness<Packet>,
    pub relay: RelayCore,
    peers: [SimPeer; 2],
    checks: Vec<PendingCheck>,
    closed_by_relay: Vec<Role>,
}

fn idx(role: Role) -> usize {
    match role {
        Role::Initiator => 0,
        Role::Responder => 1,
    }
}

impl SimWorld {
    pub fn new(cfg: SimNetConfig) -> Result<Self, HarnessError> {
        let net = NetHarness::new(cfg.profile.clone())?;
        let mut relay = RelayCore::new(DEFAULT_ROOM_TTL_MS, IdGenerator::seeded("relay", cfg.profile.seed));
        let a = relay.connect();
        let b = relay.connect();
        let peers = [SimPeer::new(&cfg, Role::Initiator, a), SimPeer::new(&cfg, Role::Responder, b)];
        Ok(SimWorld {
            cfg,
            now: 0,
            net,
            relay,
            peers,
            checks: Vec::new(),
            closed_by_relay: Vec::new(),
        })
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn peer(&self, role: Role) -> &SimPeer {
        &self.peers[idx(role)]
    }

    pub fn peer_mut(&mut self, role: Role) -> &mut SimPeer {
        &mut self.peers[idx(role)]
    }

    pub fn net(&self) -> &NetHarness<Packet> {
        &self.net
    }

    /// Starts both session machines at the current time.
    pub fn start(&mut self) {
        let now = self.now;
        for p in &mut self.peers {
            p.fsm.start(now);
        }
        self.pump();
    }

    /// Runs until both peers are connected (or terminal) or `limit` passes.
    pub fn establish(&mut self, limit: u64) -> Result<(Phase, Phase), HarnessError> {
        self.start();
        let settled = |w: &SimWorld| {
            w.peers.iter().all(|p| p.phase().is_connected() || p.phase().is_terminal())
        };
        while !settled(self) && self.now < limit {
            let next = self.next_event().unwrap_or(limit).min(limit);
            self.run_until(next.max(self.now + 1).min(limit))?;
        }
        Ok((self.peers[0].phase(), self.peers[1].phase()))
    }

    fn next_event(&self) -> Option<u64> {
        let mut t = [
            self.net.next_arrival(),
            self.checks.iter().map(|c| c.at).min(),
        ]
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
        for p in &self.peers {
            t.extend(p.fsm.next_timer());
            t.extend(p.sender.next_deadline());
        }
        t.into_iter().min()
    }

    /// Advances the virtual clock, processing every event up to `until`.
    pub fn run_until(&mut self, until: u64) -> Result<(), HarnessError> {
        if until < self.now {
            return Err(HarnessError::ClockRegression {
                now: self.now,
                requested: until,
            });
        }
        self.pump();
        while let Some(t) = self.next_event().filter(|&t| t <= until) {
            self.now = t.max(self.now);
            let now = self.now;
            for f in self.net.advance(now)? {
                self.arrive(f.lane, f.item, now);
            }
            let (due, rest): (Vec<_>, Vec<_>) = self.checks.drain(..).partition(|c| c.at <= now);
            self.checks = rest;
            for c in due {
                self.peers[0].fsm.on_check_result(&c.candidate, c.ok, now);
            }
            for i in 0..2 {
                self.peers[i].fsm.on_timer(now);
                let resend = self.peers[i].sender.due(now);
                for seg in resend {
                    self.transmit(i, Lane::Control, seg);
                }
            }
            self.pump();
        }
        self.net.advance(until)?;
        self.now = until;
        Ok(())
    }

    /// Moves everything the peers produced onto the network.
    fn pump(&mut self) {
        loop {
            let mut progressed = false;
            for i in 0..2 {
                while let Some(out) = self.peers[i].fsm.poll_output() {
                    progressed = true;
                    self.on_output(i, out);
                }
                let frames: Vec<_> = std::mem::take(&mut *self.peers[i].outbox.0.lock().unwrap());
                for (lane, bytes) in frames {
                    progressed = true;
                    let wire = match lane {
                        Lane::Control => self.peers[i].sender.send(bytes, self.now),
                        _ => bytes,
                    };
                    self.transmit(i, lane, wire);
                }
            }
            if !progressed {
                break;
            }
        }
    }

    fn on_output(&mut self, i: usize, out: Output) {
        let now = self.now;
        match out {
            Output::Signal { bytes, .. } => self.via_relay(i, Lane::Signaling, bytes),
            Output::Check(c) => {
                let ok = !self.cfg.profile.direct_path_blocked;
                let rtt = 2 * self.cfg.profile.base_latency_ms;
                self.checks.push(PendingCheck {
                    at: now + rtt.max(1),
                    ok,
                    candidate: c,
                });
            }
            Output::Connected(_) => {
                let link = Arc::new(SimLink(self.peers[i].outbox.clone()));
                // A closed channel stays closed; nothing else can fail here.
                let _ = self.peers[i].channel.open(link);
            }
            Output::Failed(_) | Output::Closed => self.peers[i].channel.close(),
        }
    }

    fn transmit(&mut self, i: usize, lane: Lane, bytes: Vec<u8>) {
        match self.peers[i].fsm.path() {
            Some(Path::Direct(_)) if lane != Lane::Signaling => {
                let to = if i == 0 { Role::Responder } else { Role::Initiator };
                self.net.deliver(lane, Packet { to, bytes }, self.now);
            }
            _ => self.via_relay(i, lane, bytes),
        }
    }

    fn via_relay(&mut self, i: usize, lane: Lane, bytes: Vec<u8>) {
        let member = self.peers[i].member;
        for d in self.relay.on_frame(member, lane, &bytes, self.now) {
            match d {
                Delivery::To(m, lane, bytes) => {
                    let to = if m == self.peers[0].member { Role::Initiator } else { Role::Responder };
                    self.net.deliver(lane, Packet { to, bytes }, self.now);
                }
                Delivery::Close(m) => {
                    let r = if m == self.peers[0].member { Role::Initiator } else { Role::Responder };
                    self.closed_by_relay.push(r);
                }
            }
        }
    }

    fn arrive(&mut self, lane: Lane, pkt: Packet, now: u64) {
        let i = idx(pkt.to);
        match lane {
            Lane::Signaling => {
                if let Ok(env) = decode(&pkt.bytes) {
                    self.peers[i].fsm.on_signal(&env, now);
                }
            }
            Lane::Control => match Segment::decode(&pkt.bytes) {
                Some(Segment::Data { seq, payload }) => {
                    let (ready, ack) = self.peers[i].receiver.on_data(seq, payload);
                    for p in ready {
                        self.peers[i].inbound.push_bytes(&p);
                    }
                    self.transmit(i, Lane::Control, ack);
                }
                Some(Segment::Ack { next }) => self.peers[i].sender.on_ack(next),
                None => {}
            },
            Lane::Media => {
                let p = &mut self.peers[i];
                if let Some(seq) = (self.cfg.media_seq)(&pkt.bytes) {
                    if p.media.accept(seq) {
                        p.media_log.push(seq);
                    }
                }
            }
        }
    }

    /// Runs until no control message is awaiting an ack, or `limit`.
    pub fn settle(&mut self, limit: u64) -> Result<bool, HarnessError> {
        loop {
            self.pump();
            let quiet = self.peers.iter().all(|p| p.sender.in_flight() == 0) && self.net.in_flight() == 0;
            if quiet {
                return Ok(true);
            }
            if self.now >= limit {
                return Ok(false);
            }
            let next = self.next_event().unwrap_or(limit).clamp(self.now + 1, limit);
            self.run_until(next)?;
        }
    }

    /// Roles whose relay connection the relay dropped.
    pub fn relay_closed(&self) -> &[Role] {
        &self.closed_by_relay
    }
}
