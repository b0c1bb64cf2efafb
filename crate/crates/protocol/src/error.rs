use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    /// An outbound envelope violates a field invariant.
    #[error("invalid envelope: {0}")]
    InvalidEnvelope(String),
    /// Inbound bytes are not a well-formed envelope.
    #[error("malformed message: {0}")]
    MalformedMessage(String),
    /// The peer speaks a newer protocol version; reply with `protocol.error`.
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u64),
    #[error("unknown envelope type {0:?}")]
    UnknownType(String),
    #[error("type {0:?} is already registered")]
    DuplicateType(String),
}

impl ProtocolError {
    /// Short machine-readable code used in `protocol.error` payloads.
    pub fn code(&self) -> &'static str {
        match self {
            ProtocolError::InvalidEnvelope(_) => "invalid_envelope",
            ProtocolError::MalformedMessage(_) => "malformed_message",
            ProtocolError::UnsupportedVersion(_) => "unsupported_version",
            ProtocolError::UnknownType(_) => "unknown_type",
            ProtocolError::DuplicateType(_) => "duplicate_type",
        }
    }
}
