//! Reliable-ordered delivery over a lossy, reordering, duplicating path:
//! per-message sequence numbers, cumulative acks and timed resends.
//!
//! Segment layout: `kind: u8` (0 data, 1 ack), `seq: u64 BE`, payload. An
//! ack carries the next sequence number the receiver expects.

use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Data { seq: u64, payload: Vec<u8> },
    Ack { next: u64 },
}

impl Segment {
    pub fn encode(&self) -> Vec<u8> {
        match self {
            Segment::Data { seq, payload } => {
                let mut out = Vec::with_capacity(9 + payload.len());
                out.push(0);
                out.extend_from_slice(&seq.to_be_bytes());
                out.extend_from_slice(payload);
                out
            }
            Segment::Ack { next } => {
                let mut out = vec![1];
                out.extend_from_slice(&next.to_be_bytes());
                out
            }
        }
    }

    pub fn decode(bytes: &[u8]) -> Option<Segment> {
        if bytes.len() < 9 {
            return None;
        }
        let seq = u64::from_be_bytes(bytes[1..9].try_into().unwrap());
        match bytes[0] {
            0 => Some(Segment::Data {
                seq,
                payload: bytes[9..].to_vec(),
            }),
            1 if bytes.len() == 9 => Some(Segment::Ack { next: seq }),
            _ => None,
        }
    }
}

#[derive(Debug)]
pub struct ReliableSender {
    next_seq: u64,
    /// seq → (payload, last transmission time)
    unacked: BTreeMap<u64, (Vec<u8>, u64)>,
    rto_ms: u64,
    resent: u64,
}

impl ReliableSender {
    pub fn new(rto_ms: u64) -> Self {
        ReliableSender {
            next_seq: 0,
            unacked: BTreeMap::new(),
            rto_ms: rto_ms.max(1),
            resent: 0,
        }
    }

    /// Wire bytes for a new message.
    pub fn send(&mut self, payload: Vec<u8>, now: u64) -> Vec<u8> {
        let seq = self.next_seq;
        self.next_seq += 1;
        let wire = Segment::Data {
            seq,
            payload: payload.clone(),
        }
        .encode();
        self.unacked.insert(seq, (payload, now));
        wire
    }

    pub fn on_ack(&mut self, next: u64) {
        self.unacked = self.unacked.split_off(&next);
    }

    /// Retransmissions due at `now`.
    pub fn due(&mut self, now: u64) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        for (seq, (payload, sent)) in self.unacked.iter_mut() {
            if now >= *sent + self.rto_ms {
                *sent = now;
                out.push(
                    Segment::Data {
                        seq: *seq,
                        payload: payload.clone(),
                    }
                    .encode(),
                );
            }
        }
        self.resent += out.len() as u64;
        out
    }

    /// Earliest pending retransmission time.
    pub fn next_deadline(&self) -> Option<u64> {
        self.unacked.values().map(|(_, t)| t + self.rto_ms).min()
    }

    pub fn in_flight(&self) -> usize {
        self.unacked.len()
    }

    pub fn resent(&self) -> u64 {
        self.resent
    }
}

#[derive(Debug, Default)]
pub struct ReliableReceiver {
    expected: u64,
    held: BTreeMap<u64, Vec<u8>>,
    duplicates: u64,
}

impl ReliableReceiver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Accepts one data segment; returns the payloads now deliverable in
    /// order and the ack to send back.
    pub fn on_data(&mut self, seq: u64, payload: Vec<u8>) -> (Vec<Vec<u8>>, Vec<u8>) {
        let mut ready = Vec::new();
        if seq < self.expected || self.held.contains_key(&seq) {
            self.duplicates += 1;
        } else {
            self.held.insert(seq, payload);
            while let Some(p) = self.held.remove(&self.expected) {
                ready.push(p);
                self.expected += 1;
            }
        }
        (ready, Segment::Ack { next: self.expected }.encode())
    }

    pub fn duplicates(&self) -> u64 {
        self.duplicates
    }
}
