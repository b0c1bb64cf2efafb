//! The edge node: scenes, streamer and transport wired into one main loop,
//! plus the relay launcher and a headless scripted client.

pub mod app;
pub mod client;
pub mod config;
pub mod hostile;
pub mod logging;
pub mod offline;
pub mod script;
pub mod serve;

pub use app::{AppStats, EdgeApp, EdgeOptions, Tick, TICK_MS};
pub use config::{EdgeConfig, StreamConfig};
pub use logging::EventLog;
pub use script::{Script, ScriptError, Step};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EdgeError {
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("relay unreachable: {0}")]
    RelayUnreachable(String),
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error("scene setup: {0}")]
    Scene(String),
    #[error("session lost: {0}")]
    SessionLost(String),
    #[error(transparent)]
    Transport(gewu_transport::TransportError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl From<gewu_transport::TransportError> for EdgeError {
    fn from(e: gewu_transport::TransportError) -> Self {
        match e {
            gewu_transport::TransportError::SignalingUnreachable(m) => EdgeError::RelayUnreachable(m),
            other => EdgeError::Transport(other),
        }
    }
}

/// Process exit codes shared by the binaries.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const BAD_CONFIG: i32 = 2;
    pub const UNREACHABLE: i32 = 3;
}

impl EdgeError {
    pub fn exit_code(&self) -> i32 {
        match self {
            EdgeError::BadConfig(_) | EdgeError::Script(_) => exit::BAD_CONFIG,
            EdgeError::RelayUnreachable(_) => exit::UNREACHABLE,
            _ => exit::FAILURE,
        }
    }
}
