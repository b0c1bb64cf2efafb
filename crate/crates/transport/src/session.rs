//! Session establishment as a sans-I/O state machine.
//!
//! The machine consumes signaling envelopes, connectivity-check results and
//! clock readings, and emits signaling envelopes and check requests. A
//! driver (in-process, simulated network, or TCP) moves the bytes.
//!
//! ```text
//! Idle → Joining → ExchangingDescriptors → GatheringCandidates → Connecting
//!                                                   ├→ ConnectedDirect
//!                                                   └→ ConnectedRelayed
//! any → Failed | Closed
//! ```

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::fmt;

use gewu_protocol::{encode, types, Envelope, IdGenerator, Payload};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    Joining,
    ExchangingDescriptors,
    GatheringCandidates,
    Connecting,
    ConnectedDirect,
    ConnectedRelayed,
    Failed,
    Closed,
}

impl Phase {
    pub fn is_connected(self) -> bool {
        matches!(self, Phase::ConnectedDirect | Phase::ConnectedRelayed)
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Failed | Phase::Closed)
    }

    fn rank(self) -> u8 {
        match self {
            Phase::Idle => 0,
            Phase::Joining => 1,
            Phase::ExchangingDescriptors => 2,
            Phase::GatheringCandidates => 3,
            Phase::Connecting => 4,
            Phase::ConnectedDirect | Phase::ConnectedRelayed => 5,
            Phase::Failed | Phase::Closed => 6,
        }
    }

    /// Whether `self → next` is an edge of the establishment DAG.
    pub fn can_go_to(self, next: Phase) -> bool {
        if self.is_terminal() {
            return false;
        }
        if next.is_terminal() {
            return true;
        }
        next.rank() == self.rank() + 1
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Initiator,
    Responder,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Initiator => "initiator",
            Role::Responder => "responder",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        match s {
            "initiator" => Some(Role::Initiator),
            "responder" => Some(Role::Responder),
            _ => None,
        }
    }

    pub fn other(self) -> Role {
        match self {
            Role::Initiator => Role::Responder,
            Role::Responder => Role::Initiator,
        }
    }
}

/// A transport address one peer offers for a direct path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    /// Backend the address belongs to, e.g. `"tcp"` or `"inproc"`.
    pub backend: String,
    pub addr: String,
    /// Higher is preferred.
    pub preference: u32,
    /// Measured round trip, when known.
    pub rtt_ms: Option<u32>,
}

impl Candidate {
    pub fn new(backend: &str, addr: impl Into<String>, preference: u32) -> Self {
        Candidate {
            backend: backend.to_string(),
            addr: addr.into(),
            preference,
            rtt_ms: None,
        }
    }
}

/// Check order: backend preference (high first), then lowest measured RTT
/// (unmeasured last), then address.
pub fn candidate_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.preference
        .cmp(&a.preference)
        .then_with(|| match (a.rtt_ms, b.rtt_ms) {
            (Some(x), Some(y)) => x.cmp(&y),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        })
        .then_with(|| a.addr.cmp(&b.addr))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Path {
    Direct(Candidate),
    Relayed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailReason {
    SignalingUnreachable,
    EstablishTimeout,
    RelayRefused { code: String, message: String },
    PeerLeft,
}

impl fmt::Display for FailReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailReason::SignalingUnreachable => f.write_str("signaling relay unreachable"),
            FailReason::EstablishTimeout => f.write_str("establishment timed out"),
            FailReason::RelayRefused { code, message } => write!(f, "relay refused ({code}): {message}"),
            FailReason::PeerLeft => f.write_str("peer left before the session connected"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    /// Send on the signaling lane. `bytes` is the exact encoding.
    Signal { env: Envelope, bytes: Vec<u8> },
    /// Run a connectivity check against a remote candidate and report the
    /// result with [`SessionFsm::on_check_result`].
    Check(Candidate),
    Connected(Path),
    Failed(FailReason),
    Closed,
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub session_id: String,
    pub role: Role,
    /// Direct-path budget once checks start.
    pub deadline_ms: u64,
    /// Give up if the relay does not answer the join within this time.
    pub join_timeout_ms: u64,
}

impl SessionConfig {
    pub fn new(session_id: impl Into<String>, role: Role) -> Self {
        SessionConfig {
            session_id: session_id.into(),
            role,
            deadline_ms: 1000,
            join_timeout_ms: 5000,
        }
    }
}

pub struct SessionFsm {
    cfg: SessionConfig,
    ids: IdGenerator,
    phase: Phase,
    history: Vec<(u64, Phase)>,
    local: Vec<Candidate>,
    remote: Vec<Candidate>,
    joined: bool,
    peer_present: bool,
    sent_offer_or_answer: bool,
    got_offer_or_answer: bool,
    sent_candidates: bool,
    remote_done: bool,
    checks_pending: usize,
    /// Deadline of the current wait, if any.
    timer: Option<u64>,
    path: Option<Path>,
    failure: Option<FailReason>,
    outputs: VecDeque<Output>,
    transcript_msgs: u64,
    transcript_bytes: u64,
}

impl SessionFsm {
    pub fn new(cfg: SessionConfig, ids: IdGenerator, mut local: Vec<Candidate>) -> Self {
        local.sort_by(candidate_order);
        SessionFsm {
            cfg,
            ids,
            phase: Phase::Idle,
            history: vec![(0, Phase::Idle)],
            local,
            remote: Vec::new(),
            joined: false,
            peer_present: false,
            sent_offer_or_answer: false,
            got_offer_or_answer: false,
            sent_candidates: false,
            remote_done: false,
            checks_pending: 0,
            timer: None,
            path: None,
            failure: None,
            outputs: VecDeque::new(),
            transcript_msgs: 0,
            transcript_bytes: 0,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn role(&self) -> Role {
        self.cfg.role
    }

    pub fn session_id(&self) -> &str {
        &self.cfg.session_id
    }

    /// Every phase entered, with the time it was entered.
    pub fn history(&self) -> &[(u64, Phase)] {
        &self.history
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_ref()
    }

    pub fn failure(&self) -> Option<&FailReason> {
        self.failure.as_ref()
    }

    pub fn remote_candidates(&self) -> &[Candidate] {
        &self.remote
    }

    /// Signaling messages this peer sent for the relay to forward (the join
    /// request itself is consumed by the relay and not counted).
    pub fn transcript(&self) -> (u64, u64) {
        (self.transcript_msgs, self.transcript_bytes)
    }

    /// Next time [`on_timer`](Self::on_timer) must be called.
    pub fn next_timer(&self) -> Option<u64> {
        self.timer
    }

    pub fn poll_output(&mut self) -> Option<Output> {
        self.outputs.pop_front()
    }

    pub fn start(&mut self, now: u64) {
        if self.phase != Phase::Idle {
            return;
        }
        self.enter(Phase::Joining, now);
        let payload = json!({"session": self.cfg.session_id, "role": self.cfg.role.as_str()});
        self.signal(types::RELAY_JOIN, payload, now, false);
        self.timer = Some(now + self.cfg.join_timeout_ms);
    }

    pub fn close(&mut self, now: u64) {
        if self.phase.is_terminal() {
            return;
        }
        if self.phase != Phase::Idle {
            self.signal(types::SIGNAL_BYE, json!({"session": self.cfg.session_id}), now, true);
        }
        self.enter(Phase::Closed, now);
        self.outputs.push_back(Output::Closed);
    }

    pub fn on_timer(&mut self, now: u64) {
        let Some(t) = self.timer else { return };
        if now < t {
            return;
        }
        self.timer = None;
        match self.phase {
            Phase::Joining if !self.joined => self.fail(FailReason::SignalingUnreachable, now),
            Phase::Connecting if self.cfg.role == Role::Initiator => self.select_relayed(now),
            Phase::ExchangingDescriptors | Phase::GatheringCandidates | Phase::Connecting => {
                self.fail(FailReason::EstablishTimeout, now)
            }
            _ => {}
        }
    }

    pub fn on_signal(&mut self, env: &Envelope, now: u64) {
        if self.phase.is_terminal() {
            return;
        }
        match env.kind.as_str() {
            types::RELAY_JOINED => {
                self.joined = true;
                self.timer = None;
                if env.payload_bool("peer") == Some(true) {
                    self.peer_arrived(now);
                }
            }
            types::RELAY_PEER_JOINED => {
                if self.joined {
                    self.peer_arrived(now);
                }
            }
            types::RELAY_ERROR => {
                let code = env.payload_str("code").unwrap_or("relay_error").to_string();
                let message = env.payload_str("message").unwrap_or("").to_string();
                if !self.phase.is_connected() {
                    self.fail(FailReason::RelayRefused { code, message }, now);
                }
            }
            types::RELAY_PEER_LEFT | types::SIGNAL_BYE => {
                if self.phase.is_connected() {
                    self.enter(Phase::Closed, now);
                    self.outputs.push_back(Output::Closed);
                } else if env.kind == types::SIGNAL_BYE || self.peer_present {
                    self.fail(FailReason::PeerLeft, now);
                }
            }
            types::SIGNAL_OFFER if self.cfg.role == Role::Responder => {
                if !self.peer_present {
                    self.peer_arrived(now);
                }
                if !self.got_offer_or_answer {
                    self.got_offer_or_answer = true;
                    self.signal(types::SIGNAL_ANSWER, self.descriptor(), now, true);
                    self.sent_offer_or_answer = true;
                    self.gather(now);
                }
            }
            types::SIGNAL_ANSWER if self.cfg.role == Role::Initiator => {
                if self.sent_offer_or_answer && !self.got_offer_or_answer {
                    self.got_offer_or_answer = true;
                    self.gather(now);
                }
            }
            types::SIGNAL_CANDIDATE => {
                if let Ok(c) = serde_json::from_value::<Candidate>(Value::Object(env.payload.clone())) {
                    if !self.remote.contains(&c) && self.phase.rank() < Phase::Connecting.rank() {
                        self.remote.push(c);
                    }
                }
            }
            types::SIGNAL_END_OF_CANDIDATES => {
                self.remote_done = true;
                self.maybe_connect(now);
            }
            types::SIGNAL_SELECTED if self.cfg.role == Role::Responder => {
                if self.phase != Phase::Connecting && self.phase != Phase::GatheringCandidates {
                    return;
                }
                match env.payload_str("mode") {
                    Some("direct") => {
                        let addr = env.payload_str("addr").unwrap_or_default();
                        match self.local.iter().find(|c| c.addr == addr).cloned() {
                            Some(c) => self.connected(Path::Direct(c), now),
                            None => self.connected(Path::Relayed, now),
                        }
                    }
                    _ => self.connected(Path::Relayed, now),
                }
            }
            _ => {}
        }
    }

    /// Result of a connectivity check requested through [`Output::Check`].
    pub fn on_check_result(&mut self, candidate: &Candidate, ok: bool, now: u64) {
        if self.phase != Phase::Connecting || self.cfg.role != Role::Initiator {
            return;
        }
        self.checks_pending = self.checks_pending.saturating_sub(1);
        if ok {
            self.timer = None;
            let payload = json!({"mode": "direct", "addr": candidate.addr});
            self.signal(types::SIGNAL_SELECTED, payload, now, true);
            self.connected(Path::Direct(candidate.clone()), now);
        } else if self.checks_pending == 0 {
            self.select_relayed(now);
        }
    }

    fn descriptor(&self) -> Value {
        json!({
            "session": self.cfg.session_id,
            "role": self.cfg.role.as_str(),
            "lanes": ["control", "media"],
        })
    }

    fn peer_arrived(&mut self, now: u64) {
        if self.peer_present || self.phase != Phase::Joining {
            return;
        }
        self.peer_present = true;
        self.enter(Phase::ExchangingDescriptors, now);
        self.timer = Some(now + 4 * self.cfg.deadline_ms.max(250));
        if self.cfg.role == Role::Initiator {
            self.signal(types::SIGNAL_OFFER, self.descriptor(), now, true);
            self.sent_offer_or_answer = true;
        }
    }

    fn gather(&mut self, now: u64) {
        if self.phase != Phase::ExchangingDescriptors {
            return;
        }
        self.enter(Phase::GatheringCandidates, now);
        self.timer = Some(now + 4 * self.cfg.deadline_ms.max(250));
        for c in self.local.clone() {
            let payload = serde_json::to_value(&c).expect("candidate serializes");
            self.signal(types::SIGNAL_CANDIDATE, payload, now, true);
        }
        self.signal(types::SIGNAL_END_OF_CANDIDATES, json!({}), now, true);
        self.sent_candidates = true;
        self.maybe_connect(now);
    }

    fn maybe_connect(&mut self, now: u64) {
        if self.phase != Phase::GatheringCandidates || !self.sent_candidates || !self.remote_done {
            return;
        }
        self.enter(Phase::Connecting, now);
        match self.cfg.role {
            Role::Initiator => {
                self.timer = Some(now + self.cfg.deadline_ms);
                self.remote.sort_by(candidate_order);
                self.checks_pending = self.remote.len();
                if self.remote.is_empty() {
                    self.select_relayed(now);
                } else {
                    for c in self.remote.clone() {
                        self.outputs.push_back(Output::Check(c));
                    }
                }
            }
            // The responder follows the initiator's selection, with slack
            // for the selection message to cross the relay.
            Role::Responder => self.timer = Some(now + 2 * self.cfg.deadline_ms + 1000),
        }
    }

    fn select_relayed(&mut self, now: u64) {
        if self.phase != Phase::Connecting {
            return;
        }
        self.timer = None;
        self.signal(types::SIGNAL_SELECTED, json!({"mode": "relayed"}), now, true);
        self.connected(Path::Relayed, now);
    }

    fn connected(&mut self, path: Path, now: u64) {
        self.timer = None;
        let phase = match path {
            Path::Direct(_) => Phase::ConnectedDirect,
            Path::Relayed => Phase::ConnectedRelayed,
        };
        if self.phase != Phase::Connecting {
            // A responder may see the selection before its own gathering
            // finished; pass through Connecting to keep the path legal.
            self.enter(Phase::Connecting, now);
        }
        self.enter(phase, now);
        self.path = Some(path.clone());
        self.outputs.push_back(Output::Connected(path));
    }

    fn fail(&mut self, reason: FailReason, now: u64) {
        self.timer = None;
        self.enter(Phase::Failed, now);
        self.failure = Some(reason.clone());
        self.outputs.push_back(Output::Failed(reason));
    }

    fn enter(&mut self, next: Phase, now: u64) {
        debug_assert!(self.phase.can_go_to(next), "illegal transition {:?} → {:?}", self.phase, next);
        self.phase = next;
        self.history.push((now, next));
    }

    fn signal(&mut self, kind: &str, payload: Value, now: u64, forwarded: bool) {
        let payload: Payload = match payload {
            Value::Object(m) => m,
            _ => Payload::new(),
        };
        let env = Envelope::new(self.ids.next_id(), kind, self.ids.source(), now, payload);
        let bytes = encode(&env).expect("signaling envelopes are valid");
        if forwarded {
            self.transcript_msgs += 1;
            self.transcript_bytes += bytes.len() as u64;
        }
        self.outputs.push_back(Output::Signal { env, bytes });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dag_edges() {
        use Phase::*;
        assert!(Idle.can_go_to(Joining));
        assert!(!Joining.can_go_to(GatheringCandidates));
        assert!(Connecting.can_go_to(ConnectedRelayed));
        assert!(Connecting.can_go_to(ConnectedDirect));
        assert!(Joining.can_go_to(Failed));
        assert!(!Closed.can_go_to(Failed));
        assert!(!ConnectedDirect.can_go_to(ConnectedRelayed));
    }

    #[test]
    fn candidate_priority() {
        let mut cs = [Candidate::new("tcp", "b", 10),
            Candidate {
                rtt_ms: Some(5),
                ..Candidate::new("tcp", "z", 10)
            },
            Candidate::new("tcp", "a", 10),
            Candidate::new("inproc", "q", 100),
            Candidate {
                rtt_ms: Some(2),
                ..Candidate::new("tcp", "y", 10)
            }];
        cs.sort_by(candidate_order);
        let addrs: Vec<_> = cs.iter().map(|c| c.addr.as_str()).collect();
        assert_eq!(addrs, ["q", "y", "z", "a", "b"]);
    }

    #[test]
    fn join_timeout_means_unreachable() {
        let mut f = SessionFsm::new(SessionConfig::new("s", Role::Initiator), IdGenerator::seeded("web", 0), vec![]);
        f.start(0);
        assert!(matches!(f.poll_output(), Some(Output::Signal { .. })));
        f.on_timer(4999);
        assert_eq!(f.phase(), Phase::Joining);
        f.on_timer(5000);
        assert_eq!(f.phase(), Phase::Failed);
        assert_eq!(f.failure(), Some(&FailReason::SignalingUnreachable));
    }
}
