//! A scripted session over an adverse simulated network: the edge app on
//! one side, a transcript of snapshots and doubled load intents on the
//! other, all on the harness's virtual clock.

use std::collections::BTreeMap;

use gewu_protocol::{types, Envelope, IdGenerator, Payload};
use gewu_sim::SimScene;
use gewu_transport::simnet::{SimNetConfig, SimWorld};
use gewu_transport::{NetProfile, Phase, Role};
use serde_json::{json, Value};

use crate::app::{EdgeApp, EdgeOptions};
use crate::config::EdgeConfig;

pub const SCENES: [&str; 3] = ["RoboHeTu", "TinkerCoin", "Playground"];

#[derive(Debug, Clone)]
pub struct Transcript {
    pub snapshots: usize,
    pub snapshot_every_ms: u64,
    pub intents: usize,
    pub intent_every_ms: u64,
    /// Gap between an intent and its duplicate (a double click).
    pub duplicate_after_ms: u64,
}

impl Default for Transcript {
    fn default() -> Self {
        Transcript {
            snapshots: 500,
            snapshot_every_ms: 50,
            intents: 20,
            intent_every_ms: 1250,
            duplicate_after_ms: 30,
        }
    }
}

/// One scripted send, relative to session start.
#[derive(Debug, Clone)]
struct Scripted {
    at: u64,
    kind: &'static str,
    payload: Payload,
}

impl Transcript {
    /// Intents cycle through the scenes, starting from Playground active,
    /// so consecutive targets always differ. The last snapshot is sent
    /// after the last intent.
    fn schedule(&self) -> Vec<Scripted> {
        let mut out = Vec::new();
        for i in 0..self.snapshots {
            let a = i as f64 * 0.37;
            let mode = ["walk", "run", "cross"][i % 3];
            let payload = json!({
                "dir": [a.cos(), a.sin()],
                "speed": 0.1 + (i % 10) as f64 * 0.1,
                "mode": mode,
            });
            out.push(Scripted {
                at: 10 + i as u64 * self.snapshot_every_ms,
                kind: types::CONTROL_MOVE,
                payload: obj(payload),
            });
        }
        for k in 0..self.intents {
            let at = 500 + k as u64 * self.intent_every_ms;
            for dup in [0, self.duplicate_after_ms] {
                out.push(Scripted {
                    at: at + dup,
                    kind: types::SCENE_LOAD,
                    payload: obj(json!({ "scene": SCENES[k % SCENES.len()] })),
                });
            }
        }
        out.sort_by_key(|s| s.at);
        out
    }
}

fn obj(v: Value) -> Payload {
    match v {
        Value::Object(m) => m,
        _ => unreachable!(),
    }
}

#[derive(Debug, Clone, Default)]
pub struct HostileReport {
    pub seed: u64,
    pub connected: (Option<Phase>, Option<Phase>),
    /// The final active scene's control state came from the last snapshot.
    pub last_snapshot_applied: bool,
    pub intents_per_scene: BTreeMap<String, u64>,
    /// `scene.status: loading` emissions per scene.
    pub loads_per_scene: BTreeMap<String, u64>,
    pub loads_cancelled: u64,
    pub duplicates_ignored: u64,
    pub protocol_errors: u64,
    pub retransmissions: u64,
    pub settled: bool,
    pub virtual_ms: u64,
}

impl HostileReport {
    pub fn each_intent_loaded_once(&self) -> bool {
        self.intents_per_scene == self.loads_per_scene && self.loads_cancelled == 0
    }

    pub fn passed(&self) -> bool {
        self.settled && self.last_snapshot_applied && self.each_intent_loaded_once() && self.protocol_errors == 0
    }
}

const STEP_MS: u64 = 5;

pub fn run(profile: NetProfile, transcript: &Transcript) -> HostileReport {
    let seed = profile.seed;
    let mut report = HostileReport {
        seed,
        ..HostileReport::default()
    };
    let mut world = SimWorld::new(SimNetConfig::new(profile)).expect("valid profile");
    let (a, b) = world.establish(60_000).expect("clock moves forward");
    report.connected = (Some(a), Some(b));
    if !(a.is_connected() && b.is_connected()) {
        return report;
    }

    let opts = EdgeOptions {
        seed,
        default_scene: Some("Playground".into()),
        stream: false,
        ..EdgeOptions::default()
    };
    let t0 = world.now();
    let mut app = EdgeApp::new(&EdgeConfig::default(), &opts, t0).expect("default config boots");
    // Boot output (the default scene's own load) is not part of the transcript.
    for env in app.advance_to(t0, false).envelopes {
        let _ = world.peer(Role::Responder).channel.send(&env);
    }
    let ids = IdGenerator::seeded("web", seed);
    let schedule = transcript.schedule();
    let mut last_snapshot = None;
    for s in &schedule {
        if s.kind == types::SCENE_LOAD {
            let scene = s.payload["scene"].as_str().unwrap_or_default().to_string();
            *report.intents_per_scene.entry(scene).or_default() += 1;
        }
    }
    // Each scene is targeted twice per intent; only the first counts.
    for v in report.intents_per_scene.values_mut() {
        *v /= 2;
    }

    let pump = |world: &mut SimWorld, app: &mut EdgeApp, report: &mut HostileReport, now: u64| {
        let polled = world.peer(Role::Responder).inbound.poll(usize::MAX);
        app.ingest(polled, now);
        let out = app.advance_to(now, false);
        for env in out.envelopes {
            if env.kind == types::SCENE_STATUS && env.payload_str("status") == Some("loading") {
                let scene = env.payload_str("scene").unwrap_or_default().to_string();
                *report.loads_per_scene.entry(scene).or_default() += 1;
            }
            if env.kind == types::PROTOCOL_ERROR {
                report.protocol_errors += 1;
            }
            let _ = world.peer(Role::Responder).channel.send(&env);
        }
        world.peer(Role::Initiator).inbound.poll(usize::MAX);
    };

    let mut next = 0;
    let end = t0 + schedule.last().map_or(0, |s| s.at);
    let mut now = t0;
    while now <= end {
        while next < schedule.len() && t0 + schedule[next].at <= now {
            let s = &schedule[next];
            let env = Envelope::new(ids.next_id(), s.kind, "web", now, s.payload.clone());
            if s.kind == types::CONTROL_MOVE {
                last_snapshot = Some(env.id.clone());
            }
            let _ = world.peer(Role::Initiator).channel.send(&env);
            next += 1;
        }
        world.run_until(now).expect("clock moves forward");
        pump(&mut world, &mut app, &mut report, now);
        now += STEP_MS;
    }
    // Let retransmissions finish, then give the last load time to complete.
    let limit = now + 120_000;
    while now < limit {
        world.run_until(now).expect("clock moves forward");
        pump(&mut world, &mut app, &mut report, now);
        let quiet = world.settle(now).unwrap_or(false);
        if quiet && app.director().loading_name().is_none() && world.peer(Role::Responder).inbound.is_empty() {
            report.settled = true;
            break;
        }
        now += STEP_MS * 10;
    }
    report.virtual_ms = now - t0;

    let stats = app.director().stats();
    report.loads_cancelled = stats.loads_cancelled;
    report.duplicates_ignored = stats.duplicates_ignored;
    report.retransmissions = world.peer(Role::Initiator).retransmissions();
    report.last_snapshot_applied = match (app.director().active(), &last_snapshot) {
        (Some(scene), Some(id)) => applied_from(scene, id),
        _ => false,
    };
    report
}

fn applied_from(scene: &dyn SimScene, id: &str) -> bool {
    scene.control().from.as_deref() == Some(id)
}
