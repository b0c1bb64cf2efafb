use gewu_protocol::{Envelope, Payload};
use gewu_transport::simnet::{SimNetConfig, SimWorld};
use gewu_transport::{NetProfile, Phase, Role};
use serde_json::json;

fn snapshot(i: u32) -> Envelope {
    let p: Payload = json!({"dir": [1.0, 0.0], "speed": f64::from(i) / 1000.0, "mode": "walk"})
        .as_object()
        .unwrap()
        .clone();
    Envelope::new(format!("web-{i}-00000000"), "control.move", "web", u64::from(i), p)
}

#[test]
fn hostile_control_lane_is_repaired_and_last_write_wins() {
    for seed in 0..20 {
        let mut w = SimWorld::new(SimNetConfig::new(NetProfile::hostile().with_seed(seed))).unwrap();
        let (a, _) = w.establish(20_000).unwrap();
        assert_eq!(a, Phase::ConnectedRelayed);
        let mut applied = None;
        for i in 0..200 {
            w.peer(Role::Initiator).channel.send(&snapshot(i)).unwrap();
            let t = w.now() + 10;
            w.run_until(t).unwrap();
            for e in w.peer(Role::Responder).inbound.poll(64).envelopes {
                applied = Some(e.id);
            }
        }
        assert!(w.settle(w.now() + 120_000).unwrap(), "seed {seed} did not settle");
        for e in w.peer(Role::Responder).inbound.poll(64).envelopes {
            applied = Some(e.id);
        }
        assert_eq!(applied.as_deref(), Some("web-199-00000000"), "seed {seed}");
        assert!(w.peer(Role::Initiator).retransmissions() > 0);
    }
}

#[test]
fn lossy_media_arrives_as_increasing_subsequence() {
    let profile = NetProfile {
        loss_pct: gewu_transport::LaneLoss::data(30.0),
        reorder_pct: 10.0,
        duplicate_pct: 5.0,
        base_latency_ms: 20,
        jitter_ms: 15,
        ..NetProfile::lan()
    };
    let mut w = SimWorld::new(SimNetConfig::new(profile)).unwrap();
    w.establish(10_000).unwrap();
    for seq in 0..100u32 {
        w.peer(Role::Responder).channel.send_media(&seq.to_be_bytes()).unwrap();
        let t = w.now() + 5;
        w.run_until(t).unwrap();
    }
    w.run_until(w.now() + 1000).unwrap();
    let log = &w.peer(Role::Initiator).media_log;
    assert!(log.windows(2).all(|p| p[0] < p[1]));
    assert!(log.iter().all(|s| *s < 100));
    assert!(log.len() < 100 && log.len() > 40, "{}", log.len());
}

#[test]
fn direct_session_uses_no_fallback_bytes() {
    let mut w = SimWorld::new(SimNetConfig::new(NetProfile::lan())).unwrap();
    assert_eq!(w.establish(10_000).unwrap(), (Phase::ConnectedDirect, Phase::ConnectedDirect));
    for seq in 0..1000u32 {
        w.peer(Role::Responder).channel.send_media(&seq.to_be_bytes()).unwrap();
        w.peer(Role::Initiator).channel.send(&snapshot(seq)).unwrap();
        let t = w.now() + 1;
        w.run_until(t).unwrap();
    }
    w.settle(w.now() + 10_000).unwrap();
    let c = w.relay.stats().totals;
    assert_eq!(c.fallback_bytes(), 0);
    let (na, ba) = w.peer(Role::Initiator).fsm.transcript();
    let (nb, bb) = w.peer(Role::Responder).fsm.transcript();
    assert_eq!((c.signaling.messages, c.signaling.bytes), (na + nb, ba + bb));
    assert_eq!(w.peer(Role::Initiator).media_log.len(), 1000);
}
