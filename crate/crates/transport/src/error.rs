use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("signaling relay unreachable: {0}")]
    SignalingUnreachable(String),
    #[error("session establishment timed out")]
    EstablishTimeout,
    #[error("session closed")]
    SessionClosed,
    #[error("outbound buffer full ({0} entries)")]
    BufferOverflow(usize),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("bad stream frame: {0}")]
    BadFrame(String),
    #[error("relay refused: {code}: {message}")]
    Relay { code: String, message: String },
    #[error(transparent)]
    Protocol(#[from] gewu_protocol::ProtocolError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}
