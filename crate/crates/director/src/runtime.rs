use gewu_protocol::{Envelope, IdGenerator, Payload};
use thiserror::Error;

/// Why a scene refused a command. Each variant becomes a `protocol.error`
/// reply carrying [`SceneError::code`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SceneError {
    /// The active scene has no handler for this command type.
    #[error("scene {scene} does not support {kind}")]
    Unsupported { scene: String, kind: String },
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    /// Scene-specific refusal with its own code (e.g. `unknown_policy`).
    #[error("{message}")]
    Rejected { code: String, message: String },
}

impl SceneError {
    pub fn code(&self) -> &str {
        match self {
            SceneError::Unsupported { .. } => "unsupported",
            SceneError::InvalidPayload(_) => "invalid_payload",
            SceneError::Rejected { code, .. } => code,
        }
    }

    pub fn rejected(code: impl Into<String>, message: impl Into<String>) -> Self {
        SceneError::Rejected {
            code: code.into(),
            message: message.into(),
        }
    }
}

/// Viewpoint of the server-side renderer. Scenes reposition it when they
/// become active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    /// World point at the viewport centre (x forward, z up).
    pub center: [f64; 2],
    /// Pixels per metre at the default 320-pixel width.
    pub scale: f64,
    /// Keep the robot centred horizontally.
    pub follow: bool,
}

impl Default for Camera {
    fn default() -> Self {
        Camera {
            center: [0.0, 0.5],
            scale: 80.0,
            follow: true,
        }
    }
}

/// Outbound envelopes produced on the main loop (status, errors, telemetry).
#[derive(Debug)]
pub struct Outbox {
    ids: IdGenerator,
    now_ms: u64,
    queue: Vec<Envelope>,
}

impl Outbox {
    pub fn new(ids: IdGenerator) -> Self {
        Outbox {
            ids,
            now_ms: 0,
            queue: Vec::new(),
        }
    }

    /// Timestamp stamped on subsequently emitted envelopes.
    pub fn set_now(&mut self, now_ms: u64) {
        self.now_ms = now_ms;
    }

    pub fn now(&self) -> u64 {
        self.now_ms
    }

    pub fn next_id(&self) -> String {
        self.ids.next_id()
    }

    pub fn emit(&mut self, kind: &str, payload: Payload) {
        let env = Envelope::new(self.ids.next_id(), kind, self.ids.source(), self.now_ms, payload);
        self.queue.push(env);
    }

    pub fn push(&mut self, env: Envelope) {
        self.queue.push(env);
    }

    pub fn drain(&mut self) -> Vec<Envelope> {
        std::mem::take(&mut self.queue)
    }

    pub fn pending(&self) -> &[Envelope] {
        &self.queue
    }
}

/// The behaviour a scene plugs into the director.
///
/// Only `handle` is required; the director calls the hooks around
/// activation and deactivation.
pub trait SceneRuntime {
    /// Runs one scene-scoped command.
    fn handle(&mut self, env: &Envelope, out: &mut Outbox) -> Result<(), SceneError>;

    /// Camera synchronization on activation.
    fn sync_camera(&mut self, _camera: &mut Camera) {}

    fn on_activate(&mut self, _out: &mut Outbox) {}

    fn on_deactivate(&mut self, _out: &mut Outbox) {}
}
