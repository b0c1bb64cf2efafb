//! What a driver hands back once a session is connected.

use std::sync::Arc;

use crossbeam_channel::Receiver;

use crate::channel::Channel;
use crate::media::MediaSlot;
use crate::queue::InboundQueue;
use crate::session::{Path, Phase, Role};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinkEvent {
    /// The peer left or said bye; the session is over.
    PeerLeft,
    /// Our own connection dropped.
    Disconnected(String),
}

/// A connected session endpoint.
///
/// `channel` is safe to use from any thread; `inbound` must be polled by a
/// single consumer. Received media frames land in `media`, newest first.
pub struct Endpoint {
    pub role: Role,
    pub channel: Arc<Channel>,
    pub inbound: Arc<InboundQueue>,
    pub media: Arc<MediaSlot>,
    pub path: Path,
    pub history: Vec<(u64, Phase)>,
    /// Signaling messages and bytes this endpoint sent through the relay.
    pub transcript: (u64, u64),
    pub events: Receiver<LinkEvent>,
    pub(crate) guard: Option<Box<dyn Send + Sync>>,
}

impl Endpoint {
    pub fn close(&self) {
        self.channel.close();
        self.media.close();
    }
}

impl Drop for Endpoint {
    fn drop(&mut self) {
        self.close();
        self.guard.take();
    }
}
