use std::io::{Read, Write};
use std::net::TcpStream;
use std::thread;
use std::time::{Duration, Instant};

use gewu_protocol::{decode, types, Envelope, IdGenerator, Payload};
use gewu_transport::framing::{self, FrameDecoder};
use gewu_transport::live::{self, LiveOptions};
use gewu_transport::session::{Output, SessionConfig, SessionFsm};
use gewu_transport::{Lane, LinkEvent, Path, RelayServer, RelayServerConfig, Role, TransportError};
use tungstenite::Message;

fn env(id: &str, kind: &str) -> Envelope {
    Envelope::new(id, kind, "web", 0, Payload::new())
}

fn wait_for<T>(limit: Duration, mut f: impl FnMut() -> Option<T>) -> Option<T> {
    let t0 = Instant::now();
    while t0.elapsed() < limit {
        if let Some(v) = f() {
            return Some(v);
        }
        thread::sleep(Duration::from_millis(2));
    }
    None
}

fn pair(relay: &RelayServer, session: &str, offer_direct: bool) -> (gewu_transport::Endpoint, gewu_transport::Endpoint) {
    let mut edge_opts = LiveOptions::new(relay.addr().to_string(), session, Role::Responder);
    edge_opts.offer_direct = offer_direct;
    let edge = thread::spawn(move || live::establish(&edge_opts));
    let client = live::establish(&LiveOptions::new(relay.addr().to_string(), session, Role::Initiator)).unwrap();
    (client, edge.join().unwrap().unwrap())
}

#[test]
fn loopback_candidate_gives_a_direct_session() {
    let relay = RelayServer::start(RelayServerConfig::loopback()).unwrap();
    let (client, edge) = pair(&relay, "direct", true);
    assert!(matches!(client.path, Path::Direct(_)));
    assert!(matches!(edge.path, Path::Direct(_)));

    client.channel.send(&env("web-1-00000000", "scene.load")).unwrap();
    let got = wait_for(Duration::from_secs(5), || edge.inbound.poll(8).envelopes.into_iter().next()).unwrap();
    assert_eq!(got.id, "web-1-00000000");
    for i in 0..50u8 {
        edge.channel.send_media(&[i; 100]).unwrap();
    }
    let frame = wait_for(Duration::from_secs(5), || client.media.try_take()).unwrap();
    assert_eq!(frame.len(), 100);

    let stats = relay.room("direct").unwrap().counters;
    assert_eq!(stats.fallback_bytes(), 0);
    assert_eq!(stats.signaling.messages, client.transcript.0 + edge.transcript.0);
    assert_eq!(stats.signaling.bytes, client.transcript.1 + edge.transcript.1);
}

#[test]
fn no_candidates_gives_a_relayed_session_that_carries_data() {
    let relay = RelayServer::start(RelayServerConfig::loopback()).unwrap();
    let (client, edge) = pair(&relay, "relayed", false);
    assert_eq!(client.path, Path::Relayed);
    assert_eq!(edge.path, Path::Relayed);
    for i in 0..20 {
        client.channel.send(&env(&format!("web-{i}-00000000"), "scene.load")).unwrap();
    }
    let mut ids = Vec::new();
    wait_for(Duration::from_secs(5), || {
        ids.extend(edge.inbound.poll(64).envelopes.into_iter().map(|e| e.id));
        (ids.len() == 20).then_some(())
    })
    .unwrap();
    assert_eq!(ids, (0..20).map(|i| format!("web-{i}-00000000")).collect::<Vec<_>>());
    edge.channel.send_media(b"frame").unwrap();
    assert_eq!(wait_for(Duration::from_secs(5), || client.media.try_take()).unwrap(), b"frame");
    let c = relay.room("relayed").unwrap().counters;
    assert!(c.fallback_control.messages >= 20);
    assert!(c.fallback_media.bytes >= 5);
}

#[test]
fn peer_departure_is_reported() {
    let relay = RelayServer::start(RelayServerConfig::loopback()).unwrap();
    let (client, edge) = pair(&relay, "bye", true);
    drop(client);
    let ev = edge.events.recv_timeout(Duration::from_secs(5)).unwrap();
    assert_eq!(ev, LinkEvent::PeerLeft);
}

#[test]
fn second_initiator_is_refused() {
    let relay = RelayServer::start(RelayServerConfig::loopback()).unwrap();
    let addr = relay.addr().to_string();
    let a = thread::spawn({
        let addr = addr.clone();
        move || {
            let mut o = LiveOptions::new(addr, "dup", Role::Initiator);
            o.peer_timeout_ms = Some(1500);
            live::establish(&o)
        }
    });
    thread::sleep(Duration::from_millis(200));
    let second = live::establish(&LiveOptions::new(addr, "dup", Role::Initiator));
    match second {
        Err(TransportError::Relay { code, .. }) => assert_eq!(code, "role_taken"),
        other => panic!("unexpected: {:?}", other.map(|e| e.path.clone())),
    }
    assert!(matches!(a.join().unwrap(), Err(TransportError::EstablishTimeout)));
}

#[test]
fn health_endpoint_says_ok() {
    let relay = RelayServer::start(RelayServerConfig::loopback()).unwrap();
    let mut s = TcpStream::connect(relay.health_addr().unwrap()).unwrap();
    s.write_all(b"GET / HTTP/1.0\r\n\r\n").unwrap();
    let mut body = String::new();
    s.read_to_string(&mut body).unwrap();
    assert!(body.starts_with("HTTP/1.1 200 OK"));
    assert!(body.contains("\r\n\r\nok\n"));
    assert!(body.contains("fallback_media_bytes 0"));
}

/// A browser-like initiator: the session machine driven over the
/// WebSocket bridge, with every message a binary frame in stream format.
#[test]
fn websocket_bridge_speaks_stream_framing() {
    let relay = RelayServer::start(RelayServerConfig::loopback()).unwrap();
    let mut edge_opts = LiveOptions::new(relay.addr().to_string(), "ws", Role::Responder);
    edge_opts.offer_direct = false;
    let edge = thread::spawn(move || live::establish(&edge_opts));

    let url = format!("ws://{}/", relay.ws_addr().unwrap());
    let (mut ws, _) = tungstenite::connect(url).unwrap();
    if let tungstenite::stream::MaybeTlsStream::Plain(s) = ws.get_mut() {
        s.set_read_timeout(Some(Duration::from_millis(10))).unwrap();
    }
    let mut fsm = SessionFsm::new(SessionConfig::new("ws", Role::Initiator), IdGenerator::seeded("web", 3), vec![]);
    let t0 = Instant::now();
    let now = || t0.elapsed().as_millis() as u64;
    fsm.start(now());
    let mut decoder = FrameDecoder::new();
    let mut connected = None;
    while connected.is_none() && t0.elapsed() < Duration::from_secs(10) {
        while let Some(o) = fsm.poll_output() {
            match o {
                Output::Signal { bytes, .. } => ws.send(Message::binary(framing::encode(Lane::Signaling, &bytes))).unwrap(),
                Output::Check(c) => fsm.on_check_result(&c, false, now()),
                Output::Connected(p) => connected = Some(p),
                other => panic!("{other:?}"),
            }
        }
        fsm.on_timer(now());
        if let Ok(Message::Binary(b)) = ws.read() {
            decoder.push(&b);
            while let Some((lane, p)) = decoder.next_frame().unwrap() {
                assert_eq!(lane, Lane::Signaling);
                fsm.on_signal(&decode(&p).unwrap(), now());
            }
        }
    }
    assert_eq!(connected, Some(Path::Relayed));
    let edge = edge.join().unwrap().unwrap();
    assert_eq!(edge.path, Path::Relayed);

    let cmd = gewu_protocol::encode(&env("web-9-00000000", "scene.load")).unwrap();
    ws.send(Message::binary(framing::encode(Lane::Control, &cmd))).unwrap();
    let got = wait_for(Duration::from_secs(5), || edge.inbound.poll(4).envelopes.into_iter().next()).unwrap();
    assert_eq!(got.kind, types::SCENE_LOAD);

    edge.channel.send_media(b"pixels").unwrap();
    let media = wait_for(Duration::from_secs(5), || match ws.read() {
        Ok(Message::Binary(b)) => {
            decoder.push(&b);
            decoder.next_frame().unwrap()
        }
        _ => None,
    })
    .unwrap();
    assert_eq!(media, (Lane::Media, b"pixels".to_vec()));
}
