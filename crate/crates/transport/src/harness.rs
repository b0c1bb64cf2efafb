//! Deterministic adverse-network model driven by a virtual clock.
//!
//! Every decision for a message is drawn from a generator seeded by
//! `(profile seed, lane, per-lane message index)`, so a profile and a send
//! transcript fully determine the delivery schedule.
//!
//! The signaling lane models the relay's stream socket: it is delayed like
//! the other lanes but never loses, duplicates or reorders messages.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::framing::Lane;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HarnessError {
    #[error("clock regression: asked for {requested} ms, clock is at {now} ms")]
    ClockRegression { now: u64, requested: u64 },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaneLoss {
    pub control: f64,
    pub media: f64,
    pub signaling: f64,
}

impl LaneLoss {
    pub fn uniform(pct: f64) -> Self {
        LaneLoss {
            control: pct,
            media: pct,
            signaling: pct,
        }
    }

    /// Loss on the control and media lanes only.
    pub fn data(pct: f64) -> Self {
        LaneLoss {
            control: pct,
            media: pct,
            signaling: 0.0,
        }
    }

    pub fn get(&self, lane: Lane) -> f64 {
        match lane {
            Lane::Control => self.control,
            Lane::Media => self.media,
            Lane::Signaling => self.signaling,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetProfile {
    pub seed: u64,
    pub base_latency_ms: u64,
    /// Uniform ± around the base latency.
    pub jitter_ms: u64,
    pub loss_pct: LaneLoss,
    pub reorder_pct: f64,
    pub duplicate_pct: f64,
    pub direct_path_blocked: bool,
}

impl Default for NetProfile {
    fn default() -> Self {
        NetProfile::lan()
    }
}

pub const PRESETS: [&str; 3] = ["lan", "lossy-wifi", "hostile"];

impl NetProfile {
    pub fn lan() -> Self {
        NetProfile {
            seed: 0,
            base_latency_ms: 1,
            jitter_ms: 0,
            loss_pct: LaneLoss::default(),
            reorder_pct: 0.0,
            duplicate_pct: 0.0,
            direct_path_blocked: false,
        }
    }

    pub fn lossy_wifi() -> Self {
        NetProfile {
            base_latency_ms: 20,
            jitter_ms: 10,
            loss_pct: LaneLoss::data(5.0),
            ..NetProfile::lan()
        }
    }

    pub fn hostile() -> Self {
        NetProfile {
            base_latency_ms: 40,
            jitter_ms: 20,
            loss_pct: LaneLoss::data(30.0),
            reorder_pct: 10.0,
            duplicate_pct: 5.0,
            direct_path_blocked: true,
            ..NetProfile::lan()
        }
    }

    pub fn preset(name: &str) -> Option<NetProfile> {
        match name {
            "lan" => Some(Self::lan()),
            "lossy-wifi" => Some(Self::lossy_wifi()),
            "hostile" => Some(Self::hostile()),
            _ => None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let pcts = [
            ("loss_pct.control", self.loss_pct.control),
            ("loss_pct.media", self.loss_pct.media),
            ("loss_pct.signaling", self.loss_pct.signaling),
            ("reorder_pct", self.reorder_pct),
            ("duplicate_pct", self.duplicate_pct),
        ];
        for (name, v) in pcts {
            if !(0.0..=100.0).contains(&v) {
                return Err(HarnessError::InvalidProfile(format!("{name} = {v} is outside [0, 100]")));
            }
        }
        if self.jitter_ms > self.base_latency_ms {
            return Err(HarnessError::InvalidProfile(format!(
                "jitter_ms ({}) exceeds base_latency_ms ({})",
                self.jitter_ms, self.base_latency_ms
            )));
        }
        Ok(())
    }
}

/// Fate of one message before reordering is applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    /// Arrival times of each copy; empty when dropped.
    pub arrivals: Vec<u64>,
    /// Swap arrival with the lane's next message.
    pub reorder: bool,
}

fn lane_rng(seed: u64, lane: Lane, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((lane as u64) << 56) ^ index);
    rng
}

/// The pure per-message decision function.
pub fn decide(profile: &NetProfile, lane: Lane, index: u64, send_time: u64) -> Decision {
    let mut rng = lane_rng(profile.seed, lane, index);
    // Always draw the same number of values so one knob does not shift
    // the others.
    let u_loss: f64 = rng.gen();
    let u_dup: f64 = rng.gen();
    let u_reorder: f64 = rng.gen();
    let j1: f64 = rng.gen();
    let j2: f64 = rng.gen();
    let delay = |u: f64| {
        let j = profile.jitter_ms as f64;
        let d = profile.base_latency_ms as f64 + (2.0 * u - 1.0) * j;
        send_time + d.round().max(0.0) as u64
    };
    if lane == Lane::Signaling {
        return Decision {
            arrivals: vec![delay(j1)],
            reorder: false,
        };
    }
    if u_loss * 100.0 < profile.loss_pct.get(lane) {
        return Decision {
            arrivals: Vec::new(),
            reorder: false,
        };
    }
    let mut arrivals = vec![delay(j1)];
    if u_dup * 100.0 < profile.duplicate_pct {
        arrivals.push(delay(j2) + 1);
    }
    Decision {
        arrivals,
        reorder: u_reorder * 100.0 < profile.reorder_pct,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fired<T> {
    pub at: u64,
    pub lane: Lane,
    pub item: T,
}

/// A virtual-time network carrying items of type `T` on three lanes.
pub struct NetHarness<T> {
    profile: NetProfile,
    now: u64,
    order: u64,
    queue: BTreeMap<(u64, u64), (Lane, T)>,
    sent: [u64; 3],
    dropped: [u64; 3],
    duplicated: [u64; 3],
    reordered: [u64; 3],
    /// Queue key of a message waiting to swap with its lane successor.
    held: [Option<(u64, u64)>; 3],
    last_signaling: u64,
}

impl<T: Clone> NetHarness<T> {
    pub fn new(profile: NetProfile) -> Result<Self, HarnessError> {
        profile.validate()?;
        Ok(NetHarness {
            profile,
            now: 0,
            order: 0,
            queue: BTreeMap::new(),
            sent: [0; 3],
            dropped: [0; 3],
            duplicated: [0; 3],
            reordered: [0; 3],
            held: [None; 3],
            last_signaling: 0,
        })
    }

    pub fn profile(&self) -> &NetProfile {
        &self.profile
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// Schedules `item`, sent at `send_time` (clamped to the clock), and
    /// returns the arrival times of its copies.
    pub fn deliver(&mut self, lane: Lane, item: T, send_time: u64) -> Vec<u64> {
        let send_time = send_time.max(self.now);
        let li = lane.index();
        let index = self.sent[li];
        self.sent[li] += 1;
        let mut d = decide(&self.profile, lane, index, send_time);
        if d.arrivals.is_empty() {
            self.dropped[li] += 1;
            return Vec::new();
        }
        if lane == Lane::Signaling {
            // Stream semantics: never overtake an earlier message.
            d.arrivals[0] = d.arrivals[0].max(self.last_signaling);
            self.last_signaling = d.arrivals[0];
        }
        if d.arrivals.len() > 1 {
            self.duplicated[li] += 1;
        }

        let mut first_key = self.insert(d.arrivals[0], lane, item.clone());
        if let Some(prev) = self.held[li].take() {
            if let Some(prev_entry) = self.queue.remove(&prev) {
                // Swap arrival times with the held predecessor.
                let mine = self.queue.remove(&first_key).expect("just inserted");
                self.insert(first_key.0, lane, prev_entry.1);
                first_key = self.insert(prev.0, lane, mine.1);
                self.reordered[li] += 1;
            }
        }
        let mut times = vec![first_key.0];
        for &t in &d.arrivals[1..] {
            self.insert(t, lane, item.clone());
            times.push(t);
        }
        if d.reorder {
            self.held[li] = Some(first_key);
        }
        times
    }

    fn insert(&mut self, at: u64, lane: Lane, item: T) -> (u64, u64) {
        let key = (at, self.order);
        self.order += 1;
        self.queue.insert(key, (lane, item));
        key
    }

    /// Fires every delivery scheduled at or before `until`, in schedule
    /// order, and moves the clock to `until`.
    pub fn advance(&mut self, until: u64) -> Result<Vec<Fired<T>>, HarnessError> {
        if until < self.now {
            return Err(HarnessError::ClockRegression {
                now: self.now,
                requested: until,
            });
        }
        let mut out = Vec::new();
        while let Some(entry) = self.queue.first_entry() {
            if entry.key().0 > until {
                break;
            }
            let ((at, _), (lane, item)) = entry.remove_entry();
            out.push(Fired { at, lane, item });
        }
        for h in &mut self.held {
            if let Some(k) = *h {
                if !self.queue.contains_key(&k) {
                    *h = None;
                }
            }
        }
        self.now = until;
        Ok(out)
    }

    pub fn next_arrival(&self) -> Option<u64> {
        self.queue.keys().next().map(|k| k.0)
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }

    pub fn stats(&self, lane: Lane) -> LaneStats {
        let i = lane.index();
        LaneStats {
            sent: self.sent[i],
            dropped: self.dropped[i],
            duplicated: self.duplicated[i],
            reordered: self.reordered[i],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LaneStats {
    pub sent: u64,
    pub dropped: u64,
    pub duplicated: u64,
    pub reordered: u64,
}
