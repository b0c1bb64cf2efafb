#[path = "fixtures/lighthouse.rs"]
mod lighthouse;
#[path = "fixtures/contract.rs"]
mod contract;

use gewu_edge::{EdgeApp, EdgeConfig, EdgeOptions};
use gewu_protocol::{types, Envelope, Payload};
use serde_json::json;

fn env(id: &str, kind: &str, payload: serde_json::Value) -> Envelope {
    let p: Payload = payload.as_object().unwrap().clone();
    Envelope::new(id, kind, "web", 0, p)
}

#[test]
fn fourth_scene_runs_beside_the_builtins() {
    let mut app = EdgeApp::new(&EdgeConfig::default(), &EdgeOptions::default(), 0).unwrap();
    lighthouse::register(app.director_mut()).unwrap();
    app.route(env("a", types::SCENE_LOAD, json!({"scene": "light"})), 0);
    app.route(env("b", lighthouse::TOGGLE, json!({"on": true})), 10);
    let out = app.advance_to(400, true);
    assert_eq!(app.active_name(), Some(lighthouse::NAME));
    // The toggle was deferred behind the load and replayed on activation.
    assert!(out.envelopes.iter().any(|e| e.kind == "lamp.state" && e.payload_bool("on") == Some(true)));
    assert!(out.frame.is_some());

    app.route(env("c", types::SCENE_LOAD, json!({"scene": "RoboHeTu"})), 500);
    app.advance_to(900, true);
    app.route(env("d", lighthouse::TOGGLE, json!({})), 901);
    let out = app.advance_to(950, true);
    let err = out.envelopes.iter().find(|e| e.kind == types::PROTOCOL_ERROR).unwrap();
    assert_eq!(err.payload_str("code"), Some("unsupported"));
}

#[test]
fn fixture_leaves_transport_and_protocol_alone() {
    contract::transport_and_protocol_untouched().unwrap();
}
