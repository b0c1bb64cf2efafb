use gewu_protocol::{classify, decode, encode, CommandTaxonomy, Envelope, Payload};
use proptest::prelude::*;
use serde_json::Value;

fn type_string() -> impl Strategy<Value = String> {
    prop::collection::vec("[a-z0-9_]{1,8}", 2..4).prop_map(|segs| segs.join("."))
}

fn leaf() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::from),
        any::<i64>().prop_map(Value::from),
        (-1e12f64..1e12).prop_map(Value::from),
        ".{0,12}".prop_map(Value::from),
    ]
}

fn payload() -> impl Strategy<Value = Payload> {
    let value = leaf().prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::from),
            prop::collection::btree_map("[a-z]{1,6}", inner, 0..4)
                .prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    });
    prop::collection::btree_map("[a-z_]{1,8}", value, 0..5).prop_map(|m| m.into_iter().collect())
}

prop_compose! {
    fn envelope()(
        id in "[a-zA-Z0-9-]{1,24}",
        kind in type_string(),
        source in "[a-z]{1,8}",
        ts in any::<u64>(),
        payload in payload(),
    ) -> Envelope {
        Envelope::new(id, kind, source, ts, payload)
    }
}

proptest! {
    #[test]
    fn decode_inverts_encode(env in envelope()) {
        let bytes = encode(&env).unwrap();
        prop_assert_eq!(decode(&bytes).unwrap(), env);
    }

    #[test]
    fn decode_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode(&bytes);
    }

    #[test]
    fn classification_is_pure(kind in type_string()) {
        let t = CommandTaxonomy::builtin();
        prop_assert_eq!(classify(&kind), t.classify(&kind));
        prop_assert_eq!(classify(&kind), classify(&kind));
    }
}
