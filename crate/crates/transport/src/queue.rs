//! Single-consumer inbound queue feeding the main loop.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::thread::ThreadId;
use std::time::Duration;

use gewu_protocol::{decode, CommandClass, CommandTaxonomy, Envelope, ProtocolError};
use serde_json::Value;

/// Inbound bytes that did not decode. The consumer replies with
/// `protocol.error`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejected {
    pub error: ProtocolError,
    /// The offending message id, when it could be read.
    pub ref_id: Option<String>,
}

#[derive(Debug, Default, PartialEq)]
pub struct Polled {
    pub envelopes: Vec<Envelope>,
    /// Snapshots discarded because a newer one of the same type was queued.
    pub coalesced: usize,
    pub rejected: Vec<Rejected>,
}

#[derive(Default)]
struct Inner {
    queue: VecDeque<(u64, Envelope)>,
    rejected: Vec<Rejected>,
}

/// Producers (transport threads) only enqueue; one consumer polls.
pub struct InboundQueue {
    inner: Mutex<Inner>,
    ready: Condvar,
    arrivals: AtomicU64,
    coalesce: bool,
    taxonomy: CommandTaxonomy,
    consumer: Mutex<Option<ThreadId>>,
}

impl InboundQueue {
    /// `coalesce` drops all but the newest snapshot per type at poll time.
    pub fn new(coalesce: bool) -> Self {
        InboundQueue {
            inner: Mutex::new(Inner::default()),
            ready: Condvar::new(),
            arrivals: AtomicU64::new(0),
            coalesce,
            taxonomy: CommandTaxonomy::builtin(),
            consumer: Mutex::new(None),
        }
    }

    pub fn push(&self, env: Envelope) {
        let idx = self.arrivals.fetch_add(1, Ordering::Relaxed);
        self.inner.lock().unwrap().queue.push_back((idx, env));
        self.ready.notify_all();
    }

    /// Decodes one control message and enqueues it, or records the
    /// rejection.
    pub fn push_bytes(&self, bytes: &[u8]) {
        match decode(bytes) {
            Ok(env) => self.push(env),
            Err(error) => {
                let ref_id = serde_json::from_slice::<Value>(bytes)
                    .ok()
                    .and_then(|v| v.get("id").and_then(Value::as_str).map(String::from));
                self.inner.lock().unwrap().rejected.push(Rejected { error, ref_id });
                self.ready.notify_all();
            }
        }
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total envelopes ever enqueued.
    pub fn arrivals(&self) -> u64 {
        self.arrivals.load(Ordering::Relaxed)
    }

    pub fn poll(&self, max: usize) -> Polled {
        self.check_consumer();
        let mut inner = self.inner.lock().unwrap();
        let mut coalesced = 0;
        if self.coalesce {
            let mut newest: HashMap<&str, u64> = HashMap::new();
            for (idx, env) in &inner.queue {
                if self.taxonomy.class_or_intent(&env.kind) == CommandClass::Snapshot {
                    newest.insert(env.kind.as_str(), *idx);
                }
            }
            let keep: HashMap<String, u64> = newest.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
            let before = inner.queue.len();
            inner.queue.retain(|(idx, env)| keep.get(&env.kind).is_none_or(|newest| newest == idx));
            coalesced = before - inner.queue.len();
        }
        let n = max.min(inner.queue.len());
        let envelopes = inner.queue.drain(..n).map(|(_, e)| e).collect();
        let rejected = std::mem::take(&mut inner.rejected);
        Polled {
            envelopes,
            coalesced,
            rejected,
        }
    }

    /// Blocks until something is queued or `timeout` passes.
    pub fn wait(&self, timeout: Duration) -> bool {
        let inner = self.inner.lock().unwrap();
        if !inner.queue.is_empty() || !inner.rejected.is_empty() {
            return true;
        }
        let (inner, _) = self.ready.wait_timeout(inner, timeout).unwrap();
        !inner.queue.is_empty() || !inner.rejected.is_empty()
    }

    fn check_consumer(&self) {
        let me = std::thread::current().id();
        let mut c = self.consumer.lock().unwrap();
        match *c {
            None => *c = Some(me),
            Some(owner) => debug_assert_eq!(owner, me, "InboundQueue polled from a second thread"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gewu_protocol::Payload;

    fn env(id: &str, kind: &str) -> Envelope {
        Envelope::new(id, kind, "web", 0, Payload::new())
    }

    fn ids(p: &Polled) -> Vec<&str> {
        p.envelopes.iter().map(|e| e.id.as_str()).collect()
    }

    #[test]
    fn coalesces_snapshots() {
        let q = InboundQueue::new(true);
        q.push(env("A", "scene.load"));
        q.push(env("B", "control.move"));
        q.push(env("C", "control.move"));
        let p = q.poll(10);
        assert_eq!(ids(&p), ["A", "C"]);
        assert_eq!(p.coalesced, 1);
    }

    #[test]
    fn fifo_without_coalescing() {
        let q = InboundQueue::new(false);
        assert!(q.poll(4).envelopes.is_empty());
        for i in 0..10 {
            q.push(env(&format!("i{i}"), "scene.load"));
        }
        assert_eq!(ids(&q.poll(4)), ["i0", "i1", "i2", "i3"]);
        q.push(env("m1", "control.move"));
        q.push(env("m2", "control.move"));
        let p = q.poll(100);
        assert_eq!(p.envelopes.len(), 8);
        assert_eq!(p.coalesced, 0);
    }

    #[test]
    fn malformed_input_is_reported_not_queued() {
        let q = InboundQueue::new(true);
        q.push_bytes(b"not json");
        q.push_bytes(br#"{"v":2,"id":"new","type":"a.b","source":"s","ts":0,"payload":{}}"#);
        let p = q.poll(10);
        assert!(p.envelopes.is_empty());
        assert_eq!(p.rejected.len(), 2);
        assert_eq!(p.rejected[1].error, ProtocolError::UnsupportedVersion(2));
        assert_eq!(p.rejected[1].ref_id.as_deref(), Some("new"));
    }
}
