//! The envelope protocol shared by every tier.
//!
//! Every control and telemetry message is an [`Envelope`]: a versioned,
//! typed, timestamped JSON object. The `type` string selects both the
//! command semantics ([`CommandClass`]) and the handler that runs it
//! ([`DispatchTable`]).

mod classify;
mod dispatch;
mod envelope;
mod error;
mod id;

pub use classify::{classify, CommandClass, CommandTaxonomy};
pub use dispatch::DispatchTable;
pub use envelope::{
    decode, encode, error_reply, is_valid_type, Envelope, Payload, PROTOCOL_VERSION,
};
pub use error::ProtocolError;
pub use id::{make_id, IdGenerator};

/// Well-known envelope type strings.
pub mod types {
    pub const SCENE_LOAD: &str = "scene.load";
    pub const SCENE_STATUS: &str = "scene.status";
    pub const TRAINING_SET_FLAG: &str = "training.set_flag";
    pub const POLICY_SWITCH: &str = "policy.switch";
    pub const CONTROL_MOVE: &str = "control.move";
    pub const TELEMETRY_REWARD: &str = "telemetry.reward";
    pub const TELEMETRY_EPISODE: &str = "telemetry.episode";
    pub const TELEMETRY_CURRICULUM: &str = "telemetry.curriculum";
    pub const TELEMETRY_COIN: &str = "telemetry.coin";
    pub const PROTOCOL_ERROR: &str = "protocol.error";
    pub const SIGNAL_OFFER: &str = "signal.offer";
    pub const SIGNAL_ANSWER: &str = "signal.answer";
    pub const SIGNAL_CANDIDATE: &str = "signal.candidate";
    pub const SIGNAL_END_OF_CANDIDATES: &str = "signal.end_of_candidates";
    pub const SIGNAL_SELECTED: &str = "signal.selected";
    pub const SIGNAL_BYE: &str = "signal.bye";
    /// Connectivity check sent over a candidate direct path.
    pub const SIGNAL_CHECK: &str = "signal.check";
    pub const SIGNAL_CHECK_OK: &str = "signal.check_ok";
    pub const RELAY_JOIN: &str = "relay.join";
    pub const RELAY_JOINED: &str = "relay.joined";
    pub const RELAY_PEER_JOINED: &str = "relay.peer_joined";
    pub const RELAY_PEER_LEFT: &str = "relay.peer_left";
    pub const RELAY_ERROR: &str = "relay.error";
}
