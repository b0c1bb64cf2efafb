use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::ProtocolError;
use crate::types;

/// Current (and only) protocol version.
pub const PROTOCOL_VERSION: u64 = 1;

/// Type-specific key-value document carried by an envelope.
pub type Payload = Map<String, Value>;

/// One control or telemetry message.
///
/// On the wire this is a single JSON object with exactly the keys `v`, `id`,
/// `type`, `source`, `ts` and `payload`. Key order and whitespace are not
/// significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub v: u64,
    pub id: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub source: String,
    /// Producer wall-clock milliseconds since the epoch. Never used for ordering.
    pub ts: u64,
    pub payload: Payload,
}

impl Envelope {
    /// Builds a version-1 envelope. Field invariants are checked on [`encode`].
    pub fn new(
        id: impl Into<String>,
        kind: impl Into<String>,
        source: impl Into<String>,
        ts: u64,
        payload: Payload,
    ) -> Self {
        Envelope {
            v: PROTOCOL_VERSION,
            id: id.into(),
            kind: kind.into(),
            source: source.into(),
            ts,
            payload,
        }
    }

    pub fn payload_str(&self, key: &str) -> Option<&str> {
        self.payload.get(key).and_then(Value::as_str)
    }

    pub fn payload_f64(&self, key: &str) -> Option<f64> {
        self.payload.get(key).and_then(Value::as_f64)
    }

    pub fn payload_bool(&self, key: &str) -> Option<bool> {
        self.payload.get(key).and_then(Value::as_bool)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.v == 0 {
            return Err(ProtocolError::InvalidEnvelope("v must be >= 1".into()));
        }
        if self.id.is_empty() {
            return Err(ProtocolError::InvalidEnvelope("id must be non-empty".into()));
        }
        if !is_valid_type(&self.kind) {
            return Err(ProtocolError::InvalidEnvelope(format!(
                "type {:?} does not match segment(.segment)+",
                self.kind
            )));
        }
        Ok(())
    }
}

/// Type grammar: two or more dot-separated segments of `[a-z0-9_]+`.
pub fn is_valid_type(s: &str) -> bool {
    let mut segments = 0;
    for segment in s.split('.') {
        if segment.is_empty()
            || !segment
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
        {
            return false;
        }
        segments += 1;
    }
    segments >= 2
}

/// Serializes a valid envelope to UTF-8 JSON.
pub fn encode(env: &Envelope) -> Result<Vec<u8>, ProtocolError> {
    env.validate()?;
    serde_json::to_vec(env).map_err(|e| ProtocolError::InvalidEnvelope(e.to_string()))
}

/// Parses one envelope. Unknown extra keys are ignored.
pub fn decode(bytes: &[u8]) -> Result<Envelope, ProtocolError> {
    let malformed = |msg: String| ProtocolError::MalformedMessage(msg);
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| malformed(format!("not JSON: {e}")))?;
    let Value::Object(mut obj) = value else {
        return Err(malformed("top level is not an object".into()));
    };

    let v = match obj.get("v") {
        None => return Err(malformed("missing key \"v\"".into())),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| malformed("\"v\" is not a non-negative integer".into()))?,
    };
    if v == 0 {
        return Err(malformed("\"v\" must be >= 1".into()));
    }
    if v > PROTOCOL_VERSION {
        return Err(ProtocolError::UnsupportedVersion(v));
    }

    let mut take_string = |key: &str| -> Result<String, ProtocolError> {
        match obj.remove(key) {
            None => Err(malformed(format!("missing key {key:?}"))),
            Some(Value::String(s)) => Ok(s),
            Some(_) => Err(malformed(format!("{key:?} is not a string"))),
        }
    };
    let id = take_string("id")?;
    let kind = take_string("type")?;
    let source = take_string("source")?;

    let ts = match obj.get("ts") {
        None => return Err(malformed("missing key \"ts\"".into())),
        Some(ts) => ts
            .as_u64()
            .ok_or_else(|| malformed("\"ts\" is not a non-negative integer".into()))?,
    };
    let payload = match obj.remove("payload") {
        None => return Err(malformed("missing key \"payload\"".into())),
        Some(Value::Object(map)) => map,
        Some(_) => return Err(malformed("\"payload\" is not an object".into())),
    };

    let env = Envelope {
        v,
        id,
        kind,
        source,
        ts,
        payload,
    };
    env.validate()
        .map_err(|e| malformed(e.to_string()))?;
    Ok(env)
}

/// Builds a `protocol.error` reply.
///
/// `ref_id` names the offending envelope when one could be identified.
pub fn error_reply(
    id: String,
    source: &str,
    ts: u64,
    err: &ProtocolError,
    ref_id: Option<&str>,
) -> Envelope {
    let mut payload = Payload::new();
    payload.insert("code".into(), Value::from(err.code()));
    payload.insert("message".into(), Value::from(err.to_string()));
    if let Some(r) = ref_id {
        payload.insert("ref".into(), Value::from(r));
    }
    Envelope::new(id, types::PROTOCOL_ERROR, source, ts, payload)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    const LISTING: &str = r#"{"v":1,"id":"env-m9x2","type":"scene.load","source":"web","ts":1710000000000,"payload":{"scene":"RoboHeTu"}}"#;

    fn obj(v: Value) -> Payload {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn scene_load_listing_encodes_exact_keys() {
        let env = Envelope::new(
            "env-a1",
            "scene.load",
            "web",
            1_710_000_000_000,
            obj(json!({"scene": "RoboHeTu"})),
        );
        let bytes = encode(&env).unwrap();
        let value: Value = serde_json::from_slice(&bytes).unwrap();
        let map = value.as_object().unwrap();
        let mut keys: Vec<_> = map.keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["id", "payload", "source", "ts", "type", "v"]);
        assert_eq!(map["v"], json!(1));
        assert_eq!(map["type"], json!("scene.load"));
        assert_eq!(map["ts"], json!(1_710_000_000_000u64));
        assert_eq!(map["payload"], json!({"scene": "RoboHeTu"}));
        assert_eq!(decode(&bytes).unwrap(), env);
    }

    #[test]
    fn listing_text_decodes() {
        let env = decode(LISTING.as_bytes()).unwrap();
        assert_eq!(env.kind, "scene.load");
        assert_eq!(env.source, "web");
        assert_eq!(env.ts, 1_710_000_000_000);
        assert_eq!(env.payload_str("scene"), Some("RoboHeTu"));
    }

    #[test]
    fn minimal_envelope_round_trips() {
        let env = Envelope::new("x", "a.b", "s", 0, Payload::new());
        assert_eq!(decode(&encode(&env).unwrap()).unwrap(), env);
    }

    #[test]
    fn bad_type_grammar_is_rejected() {
        let env = Envelope::new("x", "SceneLoad", "s", 0, Payload::new());
        assert!(matches!(encode(&env), Err(ProtocolError::InvalidEnvelope(_))));
        for bad in ["scene", "scene.", ".load", "scene..load", "Scene.load", "scene.lo-ad", ""] {
            assert!(!is_valid_type(bad), "{bad}");
        }
        for good in ["a.b", "scene.load", "training.set_flag", "a.b.c_9"] {
            assert!(is_valid_type(good), "{good}");
        }
    }

    #[test]
    fn empty_id_and_zero_version_are_rejected() {
        let mut env = Envelope::new("", "a.b", "s", 0, Payload::new());
        assert!(encode(&env).is_err());
        env.id = "x".into();
        env.v = 0;
        assert!(encode(&env).is_err());
    }

    #[test]
    fn extra_keys_are_ignored() {
        let text = r#"{"v":1,"id":"e","type":"a.b","source":"s","ts":1,"payload":{},"extra":9}"#;
        let env = decode(text.as_bytes()).unwrap();
        assert_eq!(env, Envelope::new("e", "a.b", "s", 1, Payload::new()));
    }

    #[test]
    fn malformed_inputs() {
        let cases: &[&[u8]] = &[
            br#"{"id":"e"}"#,
            b"not json",
            b"[1,2]",
            br#"{"v":0,"id":"e","type":"a.b","source":"s","ts":1,"payload":{}}"#,
            br#"{"id":"e","type":"a.b","source":"s","ts":1,"payload":{}}"#,
            br#"{"v":1,"id":7,"type":"a.b","source":"s","ts":1,"payload":{}}"#,
            br#"{"v":1,"id":"e","type":"a.b","source":"s","ts":-1,"payload":{}}"#,
            br#"{"v":1,"id":"e","type":"a.b","source":"s","ts":1,"payload":[]}"#,
            br#"{"v":1,"id":"","type":"a.b","source":"s","ts":1,"payload":{}}"#,
            br#"{"v":1,"id":"e","type":"AB","source":"s","ts":1,"payload":{}}"#,
            &[0xff, 0xfe, 0x00],
        ];
        for case in cases {
            assert!(
                matches!(decode(case), Err(ProtocolError::MalformedMessage(_))),
                "{:?}",
                String::from_utf8_lossy(case)
            );
        }
    }

    #[test]
    fn newer_version_is_distinguished() {
        let text = r#"{"v":2,"id":"e","type":"a.b","source":"s","ts":1,"payload":{}}"#;
        assert_eq!(decode(text.as_bytes()), Err(ProtocolError::UnsupportedVersion(2)));
    }

    #[test]
    fn error_reply_carries_code_and_ref() {
        let err = ProtocolError::UnsupportedVersion(2);
        let reply = error_reply("env-edge-1-00000000".into(), "edge", 5, &err, Some("e"));
        assert_eq!(reply.kind, types::PROTOCOL_ERROR);
        assert_eq!(reply.payload_str("code"), Some("unsupported_version"));
        assert_eq!(reply.payload_str("ref"), Some("e"));
        assert!(encode(&reply).is_ok());
    }
}
