use gewu_protocol::{decode, encode, types, Envelope, IdGenerator, Payload};
use gewu_transport::relay::{Delivery, RelayCore, DEFAULT_ROOM_TTL_MS, SIGNAL_BUFFER_CAP};
use gewu_transport::Lane;
use proptest::prelude::*;
use serde_json::json;

fn core() -> RelayCore {
    RelayCore::new(DEFAULT_ROOM_TTL_MS, IdGenerator::seeded("relay", 0))
}

fn join(session: &str, role: &str) -> Vec<u8> {
    let p = json!({"session": session, "role": role}).as_object().unwrap().clone();
    encode(&Envelope::new("x-1-00000000", types::RELAY_JOIN, "x", 0, p)).unwrap()
}

fn signal(i: usize) -> Vec<u8> {
    let mut p = Payload::new();
    p.insert("n".into(), json!(i));
    encode(&Envelope::new(format!("web-{i}-00000000"), types::SIGNAL_CANDIDATE, "web", 0, p)).unwrap()
}

fn to(out: &[Delivery], member: u64, lane: Lane) -> Vec<Vec<u8>> {
    out.iter()
        .filter_map(|d| match d {
            Delivery::To(m, l, b) if *m == member && *l == lane => Some(b.clone()),
            _ => None,
        })
        .collect()
}

fn kind(b: &[u8]) -> String {
    decode(b).unwrap().kind
}

#[test]
fn both_members_learn_of_each_other() {
    let mut r = core();
    let (a, b) = (r.connect(), r.connect());
    let out = r.on_frame(a, Lane::Signaling, &join("s1", "initiator"), 0);
    let joined = decode(&to(&out, a, Lane::Signaling)[0]).unwrap();
    assert_eq!(joined.kind, types::RELAY_JOINED);
    assert_eq!(joined.payload_bool("peer"), Some(false));
    assert_eq!(joined.source, "relay");
    let out = r.on_frame(b, Lane::Signaling, &join("s1", "responder"), 1);
    assert_eq!(decode(&to(&out, b, Lane::Signaling)[0]).unwrap().payload_bool("peer"), Some(true));
    assert_eq!(kind(&to(&out, a, Lane::Signaling)[0]), types::RELAY_PEER_JOINED);
}

#[test]
fn signaling_accounting() {
    let mut r = core();
    let (a, b) = (r.connect(), r.connect());
    r.on_frame(a, Lane::Signaling, &join("s", "initiator"), 0);
    r.on_frame(b, Lane::Signaling, &join("s", "responder"), 0);
    let mut total = 0;
    for i in 0..5 {
        let m = signal(i);
        total += m.len() as u64;
        let out = r.on_frame(a, Lane::Signaling, &m, 1);
        assert_eq!(to(&out, b, Lane::Signaling), vec![m]);
    }
    let s = r.room("s").unwrap().counters;
    assert_eq!((s.signaling.messages, s.signaling.bytes), (5, total));
    assert_eq!(s.fallback_bytes(), 0);
}

#[test]
fn fresh_relay_counts_nothing() {
    let r = core();
    let s = r.stats();
    assert_eq!(s, Default::default());
}

#[test]
fn signaling_before_peer_joins_is_buffered_then_delivered() {
    let mut r = core();
    let (a, b) = (r.connect(), r.connect());
    r.on_frame(a, Lane::Signaling, &join("s", "initiator"), 0);
    for i in 0..SIGNAL_BUFFER_CAP {
        assert!(r.on_frame(a, Lane::Signaling, &signal(i), 1).is_empty());
    }
    // One past the cap is refused.
    let out = r.on_frame(a, Lane::Signaling, &signal(999), 1);
    let err = decode(&to(&out, a, Lane::Signaling)[0]).unwrap();
    assert_eq!(err.kind, types::RELAY_ERROR);
    assert_eq!(err.payload_str("code"), Some("peer_absent"));

    let out = r.on_frame(b, Lane::Signaling, &join("s", "responder"), 2);
    let got = to(&out, b, Lane::Signaling);
    assert_eq!(kind(&got[0]), types::RELAY_JOINED);
    assert_eq!(&got[1..], (0..SIGNAL_BUFFER_CAP).map(signal).collect::<Vec<_>>().as_slice());
}

#[test]
fn rooms_are_isolated() {
    let mut r = core();
    let m: Vec<u64> = (0..4).map(|_| r.connect()).collect();
    r.on_frame(m[0], Lane::Signaling, &join("A", "initiator"), 0);
    r.on_frame(m[1], Lane::Signaling, &join("A", "responder"), 0);
    r.on_frame(m[2], Lane::Signaling, &join("B", "initiator"), 0);
    r.on_frame(m[3], Lane::Signaling, &join("B", "responder"), 0);
    for lane in [Lane::Control, Lane::Media, Lane::Signaling] {
        let out = r.on_frame(m[0], lane, b"room-a-only", 1);
        assert_eq!(out, vec![Delivery::To(m[1], lane, b"room-a-only".to_vec())]);
    }
    assert_eq!(r.room("B").unwrap().counters, Default::default());
}

#[test]
fn peer_leaving_is_announced() {
    let mut r = core();
    let (a, b) = (r.connect(), r.connect());
    r.on_frame(a, Lane::Signaling, &join("s", "initiator"), 0);
    r.on_frame(b, Lane::Signaling, &join("s", "responder"), 0);
    let out = r.disconnect(b, 5);
    assert_eq!(kind(&to(&out, a, Lane::Signaling)[0]), types::RELAY_PEER_LEFT);
    // The role is free again.
    let c = r.connect();
    let out = r.on_frame(c, Lane::Signaling, &join("s", "responder"), 6);
    assert_eq!(kind(&to(&out, c, Lane::Signaling)[0]), types::RELAY_JOINED);
}

#[test]
fn first_frame_must_be_a_join() {
    let mut r = core();
    let a = r.connect();
    let out = r.on_frame(a, Lane::Control, b"hello", 0);
    assert!(out.contains(&Delivery::Close(a)));
    assert_eq!(decode(&to(&out, a, Lane::Signaling)[0]).unwrap().payload_str("code"), Some("bad_join"));
}

proptest! {
    /// Whatever one member sends on any lane, the other receives byte for
    /// byte, in order per lane.
    #[test]
    fn relay_is_transparent(frames in prop::collection::vec((0u8..3, prop::collection::vec(any::<u8>(), 0..64)), 0..80)) {
        let mut r = core();
        let (a, b) = (r.connect(), r.connect());
        r.on_frame(a, Lane::Signaling, &join("s", "initiator"), 0);
        r.on_frame(b, Lane::Signaling, &join("s", "responder"), 0);
        let mut got: [Vec<Vec<u8>>; 3] = Default::default();
        for (lane, bytes) in &frames {
            let lane = Lane::from_u8(*lane).unwrap();
            for d in r.on_frame(a, lane, bytes, 1) {
                match d {
                    Delivery::To(m, l, p) => {
                        prop_assert_eq!(m, b);
                        got[l.index()].push(p);
                    }
                    Delivery::Close(_) => prop_assert!(false),
                }
            }
        }
        for lane in Lane::ALL {
            let want: Vec<Vec<u8>> = frames.iter().filter(|(l, _)| *l == lane as u8).map(|(_, b)| b.clone()).collect();
            prop_assert_eq!(&got[lane.index()], &want);
        }
    }
}
