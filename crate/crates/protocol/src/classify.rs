use std::collections::HashMap;
use std::sync::OnceLock;

use crate::error::ProtocolError;
use crate::types;

/// Delivery semantics of an envelope type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CommandClass {
    /// Expresses a desired system state; idempotent, deduplicable, never superseded.
    StateIntent,
    /// Instantaneous control state; the newest one supersedes all earlier ones.
    Snapshot,
    /// Edge-to-client monitoring data.
    Telemetry,
    /// Session establishment and relay bookkeeping.
    SignalingControl,
}

/// Registered type string → class map.
#[derive(Debug, Clone, Default)]
pub struct CommandTaxonomy {
    classes: HashMap<String, CommandClass>,
}

impl CommandTaxonomy {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The built-in taxonomy used by every tier.
    pub fn builtin() -> Self {
        use CommandClass::*;
        let mut t = Self::empty();
        let table: &[(&str, CommandClass)] = &[
            (types::SCENE_LOAD, StateIntent),
            (types::TRAINING_SET_FLAG, StateIntent),
            (types::POLICY_SWITCH, StateIntent),
            (types::CONTROL_MOVE, Snapshot),
            (types::TELEMETRY_REWARD, Telemetry),
            (types::TELEMETRY_EPISODE, Telemetry),
            (types::TELEMETRY_CURRICULUM, Telemetry),
            (types::TELEMETRY_COIN, Telemetry),
            (types::SCENE_STATUS, Telemetry),
            (types::PROTOCOL_ERROR, Telemetry),
            (types::SIGNAL_OFFER, SignalingControl),
            (types::SIGNAL_ANSWER, SignalingControl),
            (types::SIGNAL_CANDIDATE, SignalingControl),
            (types::SIGNAL_END_OF_CANDIDATES, SignalingControl),
            (types::SIGNAL_SELECTED, SignalingControl),
            (types::SIGNAL_BYE, SignalingControl),
            (types::SIGNAL_CHECK, SignalingControl),
            (types::SIGNAL_CHECK_OK, SignalingControl),
            (types::RELAY_JOIN, SignalingControl),
            (types::RELAY_JOINED, SignalingControl),
            (types::RELAY_PEER_JOINED, SignalingControl),
            (types::RELAY_PEER_LEFT, SignalingControl),
            (types::RELAY_ERROR, SignalingControl),
        ];
        for (kind, class) in table {
            t.register(kind, *class).expect("builtin table has no duplicates");
        }
        t
    }

    pub fn register(&mut self, kind: &str, class: CommandClass) -> Result<(), ProtocolError> {
        if self.classes.contains_key(kind) {
            return Err(ProtocolError::DuplicateType(kind.to_string()));
        }
        self.classes.insert(kind.to_string(), class);
        Ok(())
    }

    pub fn classify(&self, kind: &str) -> Result<CommandClass, ProtocolError> {
        self.classes
            .get(kind)
            .copied()
            .ok_or_else(|| ProtocolError::UnknownType(kind.to_string()))
    }

    /// Class used for routing decisions: unknown types are treated as
    /// state intents so they are never superseded.
    pub fn class_or_intent(&self, kind: &str) -> CommandClass {
        self.classify(kind).unwrap_or(CommandClass::StateIntent)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Classifies against the built-in taxonomy.
pub fn classify(kind: &str) -> Result<CommandClass, ProtocolError> {
    static BUILTIN: OnceLock<CommandTaxonomy> = OnceLock::new();
    BUILTIN.get_or_init(CommandTaxonomy::builtin).classify(kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_classes() {
        assert_eq!(classify("scene.load"), Ok(CommandClass::StateIntent));
        assert_eq!(classify("training.set_flag"), Ok(CommandClass::StateIntent));
        assert_eq!(classify("control.move"), Ok(CommandClass::Snapshot));
        for t in ["telemetry.reward", "telemetry.episode", "telemetry.curriculum"] {
            assert_eq!(classify(t), Ok(CommandClass::Telemetry));
        }
        assert_eq!(
            classify("never.registered"),
            Err(ProtocolError::UnknownType("never.registered".into()))
        );
    }

    #[test]
    fn duplicate_registration_rejected() {
        let mut t = CommandTaxonomy::builtin();
        assert!(matches!(
            t.register("control.move", CommandClass::StateIntent),
            Err(ProtocolError::DuplicateType(_))
        ));
        assert_eq!(t.classify("control.move"), Ok(CommandClass::Snapshot));
        t.register("beacon.flash", CommandClass::StateIntent).unwrap();
        assert_eq!(t.classify("beacon.flash"), Ok(CommandClass::StateIntent));
    }

    #[test]
    fn unknown_defaults_to_intent() {
        let t = CommandTaxonomy::builtin();
        assert_eq!(t.class_or_intent("x.y"), CommandClass::StateIntent);
    }
}
