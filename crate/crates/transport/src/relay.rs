//! Session-scoped relay core, free of I/O.
//!
//! A room pairs one initiator with one responder. Lane 2 carries signaling
//! (buffered while the peer is absent); lanes 0 and 1 are the fallback byte
//! relay and are forwarded without being parsed. Servers own the sockets
//! and feed frames in through [`RelayCore::on_frame`].

use std::collections::{HashMap, VecDeque};

use gewu_protocol::{decode, encode, types, Envelope, IdGenerator, Payload};
use serde::Serialize;
use serde_json::{json, Value};

use crate::framing::Lane;
use crate::session::Role;

pub type MemberId = u64;

pub const SIGNAL_BUFFER_CAP: usize = 64;
pub const DEFAULT_ROOM_TTL_MS: u64 = 600_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Delivery {
    To(MemberId, Lane, Vec<u8>),
    /// Drop the member's connection.
    Close(MemberId),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LaneCounter {
    pub messages: u64,
    pub bytes: u64,
}

impl LaneCounter {
    fn add(&mut self, len: usize) {
        self.messages += 1;
        self.bytes += len as u64;
    }
}

/// Forwarded traffic by lane.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RelayCounters {
    pub signaling: LaneCounter,
    pub fallback_control: LaneCounter,
    pub fallback_media: LaneCounter,
}

impl RelayCounters {
    fn lane_mut(&mut self, lane: Lane) -> &mut LaneCounter {
        match lane {
            Lane::Signaling => &mut self.signaling,
            Lane::Control => &mut self.fallback_control,
            Lane::Media => &mut self.fallback_media,
        }
    }

    pub fn fallback_bytes(&self) -> u64 {
        self.fallback_control.bytes + self.fallback_media.bytes
    }

    fn merge(&mut self, o: &RelayCounters) {
        for (a, b) in [
            (&mut self.signaling, &o.signaling),
            (&mut self.fallback_control, &o.fallback_control),
            (&mut self.fallback_media, &o.fallback_media),
        ] {
            a.messages += b.messages;
            a.bytes += b.bytes;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RelayStats {
    pub rooms_open: u64,
    pub rooms_created: u64,
    pub rooms_expired: u64,
    pub members: u64,
    pub joins_rejected: u64,
    pub signaling_rejected: u64,
    pub media_dropped: u64,
    /// Includes rooms that have since closed.
    pub totals: RelayCounters,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoomStats {
    pub session: String,
    pub created_at: u64,
    pub members: Vec<Role>,
    pub counters: RelayCounters,
}

#[derive(Debug)]
struct Room {
    created_at: u64,
    last_activity: u64,
    /// Indexed by role: 0 initiator, 1 responder.
    slots: [Option<MemberId>; 2],
    /// Signaling from the present member, waiting for its peer.
    pending: VecDeque<Vec<u8>>,
    counters: RelayCounters,
}

fn slot(role: Role) -> usize {
    match role {
        Role::Initiator => 0,
        Role::Responder => 1,
    }
}

#[derive(Debug, Clone)]
struct Membership {
    session: String,
    role: Role,
}

#[derive(Debug)]
enum MemberState {
    Connected,
    Joined(Membership),
}

pub struct RelayCore {
    ttl_ms: u64,
    ids: IdGenerator,
    next_member: MemberId,
    members: HashMap<MemberId, MemberState>,
    rooms: HashMap<String, Room>,
    stats: RelayStats,
    closed_totals: RelayCounters,
}

impl RelayCore {
    pub fn new(ttl_ms: u64, ids: IdGenerator) -> Self {
        RelayCore {
            ttl_ms,
            ids,
            next_member: 1,
            members: HashMap::new(),
            rooms: HashMap::new(),
            stats: RelayStats::default(),
            closed_totals: RelayCounters::default(),
        }
    }

    /// Registers a new connection; it must send `relay.join` first.
    pub fn connect(&mut self) -> MemberId {
        let id = self.next_member;
        self.next_member += 1;
        self.members.insert(id, MemberState::Connected);
        id
    }

    pub fn on_frame(&mut self, member: MemberId, lane: Lane, payload: &[u8], now: u64) -> Vec<Delivery> {
        let Some(state) = self.members.get(&member) else {
            return vec![Delivery::Close(member)];
        };
        match state {
            MemberState::Connected => self.on_join(member, lane, payload, now),
            MemberState::Joined(m) => {
                let m = m.clone();
                self.forward(member, &m, lane, payload, now)
            }
        }
    }

    /// The connection went away. Notifies the peer, if any.
    pub fn disconnect(&mut self, member: MemberId, now: u64) -> Vec<Delivery> {
        let Some(MemberState::Joined(m)) = self.members.remove(&member) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut empty = false;
        if let Some(room) = self.rooms.get_mut(&m.session) {
            room.slots[slot(m.role)] = None;
            // Anything it queued for a peer that never came is stale now.
            room.pending.clear();
            room.last_activity = now;
            if let Some(peer) = room.slots[slot(m.role.other())] {
                let env = self.relay_env(types::RELAY_PEER_LEFT, json!({"session": m.session, "role": m.role}), now);
                out.push(Delivery::To(peer, Lane::Signaling, env));
            } else {
                empty = true;
            }
        }
        if empty {
            self.close_room(&m.session);
        }
        out
    }

    /// Expires rooms idle for longer than the TTL.
    pub fn sweep(&mut self, now: u64) -> Vec<Delivery> {
        let expired: Vec<String> = self
            .rooms
            .iter()
            .filter(|(_, r)| now.saturating_sub(r.last_activity) >= self.ttl_ms)
            .map(|(k, _)| k.clone())
            .collect();
        let mut out = Vec::new();
        for session in expired {
            if let Some(room) = self.rooms.get(&session) {
                for m in room.slots.iter().flatten() {
                    let env = self.relay_error("room_expired", "room idle past its time-to-live", now);
                    out.push(Delivery::To(*m, Lane::Signaling, env));
                    out.push(Delivery::Close(*m));
                    self.members.remove(m);
                }
            }
            self.stats.rooms_expired += 1;
            self.close_room(&session);
        }
        out
    }

    pub fn stats(&self) -> RelayStats {
        let mut s = self.stats.clone();
        s.rooms_open = self.rooms.len() as u64;
        s.members = self.members.len() as u64;
        let mut totals = self.closed_totals;
        for r in self.rooms.values() {
            totals.merge(&r.counters);
        }
        s.totals = totals;
        s
    }

    pub fn room(&self, session: &str) -> Option<RoomStats> {
        let r = self.rooms.get(session)?;
        Some(RoomStats {
            session: session.to_string(),
            created_at: r.created_at,
            members: [Role::Initiator, Role::Responder]
                .into_iter()
                .filter(|role| r.slots[slot(*role)].is_some())
                .collect(),
            counters: r.counters,
        })
    }

    fn close_room(&mut self, session: &str) {
        if let Some(r) = self.rooms.remove(session) {
            self.closed_totals.merge(&r.counters);
        }
    }

    fn on_join(&mut self, member: MemberId, lane: Lane, payload: &[u8], now: u64) -> Vec<Delivery> {
        let parsed = (lane == Lane::Signaling)
            .then(|| decode(payload).ok())
            .flatten()
            .filter(|e| e.kind == types::RELAY_JOIN)
            .and_then(|e| {
                let session = e.payload_str("session").filter(|s| !s.is_empty())?.to_string();
                let role = Role::parse(e.payload_str("role")?)?;
                Some((session, role))
            });
        let Some((session, role)) = parsed else {
            return self.reject(member, "bad_join", "first frame must be a relay.join with session and role", now);
        };

        if !self.rooms.contains_key(&session) {
            self.stats.rooms_created += 1;
        }
        let room = self.rooms.entry(session.clone()).or_insert_with(|| Room {
            created_at: now,
            last_activity: now,
            slots: [None, None],
            pending: VecDeque::new(),
            counters: RelayCounters::default(),
        });
        if room.slots.iter().all(Option::is_some) {
            return self.reject(member, "room_full", "room already has an initiator and a responder", now);
        }
        if room.slots[slot(role)].is_some() {
            return self.reject(member, "role_taken", &format!("room already has a {}", role.as_str()), now);
        }
        room.slots[slot(role)] = Some(member);
        room.last_activity = now;
        let peer = room.slots[slot(role.other())];
        let pending: Vec<Vec<u8>> = room.pending.drain(..).collect();
        if let Some(r) = self.rooms.get_mut(&session) {
            for p in &pending {
                r.counters.signaling.add(p.len());
            }
        }
        self.members.insert(
            member,
            MemberState::Joined(Membership {
                session: session.clone(),
                role,
            }),
        );

        let mut out = Vec::new();
        let joined = self.relay_env(
            types::RELAY_JOINED,
            json!({"session": session, "role": role, "peer": peer.is_some()}),
            now,
        );
        out.push(Delivery::To(member, Lane::Signaling, joined));
        for p in pending {
            out.push(Delivery::To(member, Lane::Signaling, p));
        }
        if let Some(peer) = peer {
            let env = self.relay_env(types::RELAY_PEER_JOINED, json!({"session": session, "role": role}), now);
            out.push(Delivery::To(peer, Lane::Signaling, env));
        }
        out
    }

    fn forward(&mut self, member: MemberId, m: &Membership, lane: Lane, payload: &[u8], now: u64) -> Vec<Delivery> {
        let Some(room) = self.rooms.get_mut(&m.session) else {
            return vec![Delivery::Close(member)];
        };
        room.last_activity = now;
        match room.slots[slot(m.role.other())] {
            Some(peer) => {
                room.counters.lane_mut(lane).add(payload.len());
                vec![Delivery::To(peer, lane, payload.to_vec())]
            }
            None => match lane {
                Lane::Signaling if room.pending.len() < SIGNAL_BUFFER_CAP => {
                    room.pending.push_back(payload.to_vec());
                    Vec::new()
                }
                Lane::Signaling => {
                    self.stats.signaling_rejected += 1;
                    let env = self.relay_error("peer_absent", "peer absent and signaling buffer full", now);
                    vec![Delivery::To(member, Lane::Signaling, env)]
                }
                Lane::Control => {
                    let env = self.relay_error("peer_absent", "no peer to forward control traffic to", now);
                    vec![Delivery::To(member, Lane::Signaling, env)]
                }
                // Media is best-effort; an error per frame would only add noise.
                Lane::Media => {
                    self.stats.media_dropped += 1;
                    Vec::new()
                }
            },
        }
    }

    fn reject(&mut self, member: MemberId, code: &str, message: &str, now: u64) -> Vec<Delivery> {
        self.stats.joins_rejected += 1;
        self.members.remove(&member);
        let env = self.relay_error(code, message, now);
        vec![Delivery::To(member, Lane::Signaling, env), Delivery::Close(member)]
    }

    fn relay_error(&self, code: &str, message: &str, now: u64) -> Vec<u8> {
        self.relay_env(types::RELAY_ERROR, json!({"code": code, "message": message}), now)
    }

    fn relay_env(&self, kind: &str, payload: Value, now: u64) -> Vec<u8> {
        let payload: Payload = match payload {
            Value::Object(m) => m,
            _ => Payload::new(),
        };
        let env = Envelope::new(self.ids.next_id(), kind, "relay", now, payload);
        encode(&env).expect("relay envelopes are valid")
    }
}
