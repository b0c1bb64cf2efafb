//! Pre-open outbound buffering and the control/media send path.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use gewu_protocol::{encode, CommandClass, CommandTaxonomy, Envelope};

use crate::error::TransportError;
use crate::framing::Lane;

/// Where bytes go once a session is connected. Implementations must keep
/// per-lane order for lanes 0 and 2.
pub trait Link: Send + Sync {
    fn send(&self, lane: Lane, payload: &[u8]) -> Result<(), TransportError>;

    fn close(&self) {}
}

#[derive(Debug, Clone)]
struct Pending {
    kind: String,
    class: CommandClass,
    bytes: Vec<u8>,
}

/// Envelopes accepted before the control channel opens.
///
/// Snapshots supersede earlier snapshots of the same type (the newer one
/// moves to the back). When full, the oldest snapshot is evicted; state
/// intents are never evicted, so a buffer full of intents rejects new
/// entries.
#[derive(Debug)]
pub struct OutboundBuffer {
    pending: VecDeque<Pending>,
    capacity: usize,
    superseded: u64,
}

pub const DEFAULT_BUFFER_CAPACITY: usize = 256;

impl OutboundBuffer {
    pub fn new(capacity: usize) -> Self {
        OutboundBuffer {
            pending: VecDeque::new(),
            capacity: capacity.max(1),
            superseded: 0,
        }
    }

    pub fn push(&mut self, kind: &str, class: CommandClass, bytes: Vec<u8>) -> Result<(), TransportError> {
        if class == CommandClass::Snapshot {
            if let Some(i) = self.pending.iter().position(|p| p.class == CommandClass::Snapshot && p.kind == kind) {
                self.pending.remove(i);
                self.superseded += 1;
            }
        }
        if self.pending.len() >= self.capacity {
            match self.pending.iter().position(|p| p.class == CommandClass::Snapshot) {
                Some(i) => {
                    self.pending.remove(i);
                    self.superseded += 1;
                }
                None => return Err(TransportError::BufferOverflow(self.capacity)),
            }
        }
        self.pending.push_back(Pending {
            kind: kind.to_string(),
            class,
            bytes,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Types of the buffered entries, in order.
    pub fn kinds(&self) -> Vec<&str> {
        self.pending.iter().map(|p| p.kind.as_str()).collect()
    }

    pub fn superseded(&self) -> u64 {
        self.superseded
    }

    pub fn drain(&mut self) -> Vec<Vec<u8>> {
        self.pending.drain(..).map(|p| p.bytes).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SendOutcome {
    /// Handed to the connected backend.
    Accepted,
    /// Held until the channel opens.
    Buffered,
}

enum Phase {
    Pending,
    Open(Arc<dyn Link>),
    Closed,
}

struct State {
    phase: Phase,
    buffer: OutboundBuffer,
}

/// One endpoint's send side: the reliable control lane plus the lossy
/// media lane.
///
/// `send` and `open` take the same lock, so the pre-open flush is atomic:
/// no post-open send can land between two flushed envelopes.
pub struct Channel {
    state: Mutex<State>,
    taxonomy: CommandTaxonomy,
}

impl Channel {
    pub fn new(capacity: usize) -> Self {
        Self::with_taxonomy(capacity, CommandTaxonomy::builtin())
    }

    pub fn with_taxonomy(capacity: usize, taxonomy: CommandTaxonomy) -> Self {
        Channel {
            state: Mutex::new(State {
                phase: Phase::Pending,
                buffer: OutboundBuffer::new(capacity),
            }),
            taxonomy,
        }
    }

    pub fn send(&self, env: &Envelope) -> Result<SendOutcome, TransportError> {
        let bytes = encode(env)?;
        let mut st = self.state.lock().unwrap();
        match &st.phase {
            Phase::Open(link) => {
                link.send(Lane::Control, &bytes)?;
                Ok(SendOutcome::Accepted)
            }
            Phase::Pending => {
                let class = self.taxonomy.class_or_intent(&env.kind);
                st.buffer.push(&env.kind, class, bytes)?;
                Ok(SendOutcome::Buffered)
            }
            Phase::Closed => Err(TransportError::SessionClosed),
        }
    }

    /// Opens the channel on `link`, flushing the buffer first. Returns the
    /// number of flushed envelopes.
    pub fn open(&self, link: Arc<dyn Link>) -> Result<usize, TransportError> {
        let mut st = self.state.lock().unwrap();
        if matches!(st.phase, Phase::Closed) {
            return Err(TransportError::SessionClosed);
        }
        let pending = st.buffer.drain();
        let n = pending.len();
        for bytes in pending {
            link.send(Lane::Control, &bytes)?;
        }
        st.phase = Phase::Open(link);
        Ok(n)
    }

    /// Best-effort media send. Before the channel opens the frame is
    /// dropped (`Ok(false)`); frames are never buffered.
    pub fn send_media(&self, frame: &[u8]) -> Result<bool, TransportError> {
        if frame.is_empty() {
            return Err(TransportError::InvalidFrame("empty frame".into()));
        }
        let st = self.state.lock().unwrap();
        match &st.phase {
            Phase::Open(link) => {
                link.send(Lane::Media, frame)?;
                Ok(true)
            }
            Phase::Pending => Ok(false),
            Phase::Closed => Err(TransportError::SessionClosed),
        }
    }

    pub fn close(&self) {
        let mut st = self.state.lock().unwrap();
        if let Phase::Open(link) = &st.phase {
            link.close();
        }
        st.phase = Phase::Closed;
        st.buffer.drain();
    }

    pub fn is_open(&self) -> bool {
        matches!(self.state.lock().unwrap().phase, Phase::Open(_))
    }

    pub fn is_closed(&self) -> bool {
        matches!(self.state.lock().unwrap().phase, Phase::Closed)
    }

    pub fn buffered(&self) -> usize {
        self.state.lock().unwrap().buffer.len()
    }

    pub fn buffered_kinds(&self) -> Vec<String> {
        self.state.lock().unwrap().buffer.kinds().into_iter().map(String::from).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gewu_protocol::{decode, Payload};

    #[derive(Default)]
    struct Capture(Mutex<Vec<(Lane, Vec<u8>)>>);

    impl Link for Capture {
        fn send(&self, lane: Lane, payload: &[u8]) -> Result<(), TransportError> {
            self.0.lock().unwrap().push((lane, payload.to_vec()));
            Ok(())
        }
    }

    fn env(id: &str, kind: &str) -> Envelope {
        Envelope::new(id, kind, "web", 0, Payload::new())
    }

    fn ids(cap: &Capture) -> Vec<String> {
        cap.0.lock().unwrap().iter().map(|(_, b)| decode(b).unwrap().id).collect()
    }

    #[test]
    fn buffered_then_flushed_in_order() {
        let ch = Channel::new(DEFAULT_BUFFER_CAPACITY);
        for id in ["a", "b", "c"] {
            assert_eq!(ch.send(&env(id, "scene.load")).unwrap(), SendOutcome::Buffered);
        }
        let cap = Arc::new(Capture::default());
        assert_eq!(ch.open(cap.clone()).unwrap(), 3);
        assert_eq!(ch.buffered(), 0);
        assert_eq!(ch.send(&env("d", "scene.load")).unwrap(), SendOutcome::Accepted);
        assert_eq!(ids(&cap), ["a", "b", "c", "d"]);
    }

    #[test]
    fn only_latest_snapshot_survives() {
        let ch = Channel::new(DEFAULT_BUFFER_CAPACITY);
        ch.send(&env("load", "scene.load")).unwrap();
        for i in 0..5 {
            ch.send(&env(&format!("m{i}"), "control.move")).unwrap();
        }
        let cap = Arc::new(Capture::default());
        ch.open(cap.clone()).unwrap();
        assert_eq!(ids(&cap), ["load", "m4"]);
    }

    #[test]
    fn overflow_keeps_intents() {
        let mut b = OutboundBuffer::new(3);
        b.push("control.move", CommandClass::Snapshot, vec![0]).unwrap();
        b.push("scene.load", CommandClass::StateIntent, vec![1]).unwrap();
        b.push("training.set_flag", CommandClass::StateIntent, vec![2]).unwrap();
        // Full: the snapshot makes room for another intent.
        b.push("scene.load", CommandClass::StateIntent, vec![3]).unwrap();
        assert_eq!(b.kinds(), ["scene.load", "training.set_flag", "scene.load"]);
        assert!(matches!(
            b.push("scene.load", CommandClass::StateIntent, vec![4]),
            Err(TransportError::BufferOverflow(3))
        ));
        assert!(matches!(
            b.push("control.move", CommandClass::Snapshot, vec![5]),
            Err(TransportError::BufferOverflow(3))
        ));
        assert_eq!(b.drain(), vec![vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn closed_and_media_rules() {
        let ch = Channel::new(4);
        assert!(!ch.send_media(&[1]).unwrap());
        assert!(matches!(ch.send_media(&[]), Err(TransportError::InvalidFrame(_))));
        let cap = Arc::new(Capture::default());
        ch.open(cap.clone()).unwrap();
        assert!(ch.send_media(&[1, 2]).unwrap());
        ch.close();
        assert!(matches!(ch.send(&env("x", "scene.load")), Err(TransportError::SessionClosed)));
        assert!(matches!(ch.send_media(&[1]), Err(TransportError::SessionClosed)));
        assert_eq!(cap.0.lock().unwrap().as_slice(), &[(Lane::Media, vec![1, 2])]);
    }
}
