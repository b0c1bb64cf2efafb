//! Transport layer: session establishment, a buffered reliable control
//! channel, a best-effort media path, the signaling relay, and a
//! deterministic network harness for testing all of it on a virtual clock.
//!
//! # Stream framing
//!
//! Every connection to the relay (and every direct TCP path) carries
//! frames of the form
//!
//! ```text
//! u32 length (big-endian) | u8 lane | payload[length - 1]
//! ```
//!
//! `length` counts the lane byte plus the payload. Lanes: `0` control
//! (Envelope JSON, reliable and ordered), `1` media (opaque frame bytes,
//! best-effort), `2` signaling (Envelope JSON). Frames over 16 MiB are
//! rejected. Over the WebSocket bridge each binary message carries one or
//! more such frames.

pub mod channel;
pub mod endpoint;
pub mod error;
pub mod framing;
pub mod harness;
pub mod inproc;
pub mod live;
pub mod media;
pub mod queue;
pub mod relay;
pub mod reliable;
pub mod server;
pub mod session;
pub mod simnet;

pub use channel::{Channel, Link, OutboundBuffer, SendOutcome, DEFAULT_BUFFER_CAPACITY};
pub use endpoint::{Endpoint, LinkEvent};
pub use error::TransportError;
pub use framing::{FrameDecoder, Lane, MAX_FRAME};
pub use harness::{HarnessError, LaneLoss, NetHarness, NetProfile};
pub use media::{MediaReceiver, MediaSlot};
pub use queue::{InboundQueue, Polled, Rejected};
pub use relay::{RelayCore, RelayCounters, RelayStats};
pub use server::{RelayServer, RelayServerConfig};
pub use session::{Candidate, FailReason, Output, Path, Phase, Role, SessionConfig, SessionFsm};
pub use simnet::{SimNetConfig, SimWorld};
