//! Lossy media path helpers: a newest-wins handoff slot on the sender and
//! a stale-frame filter on the receiver.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

/// Single-frame handoff. Offering a frame while one is waiting replaces it,
/// so a slow writer always sends the newest frame.
#[derive(Default)]
pub struct MediaSlot {
    slot: Mutex<SlotState>,
    ready: Condvar,
}

#[derive(Default)]
struct SlotState {
    frame: Option<Vec<u8>>,
    replaced: u64,
    closed: bool,
}

impl MediaSlot {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns true when an older waiting frame was discarded.
    pub fn offer(&self, frame: Vec<u8>) -> bool {
        let mut st = self.slot.lock().unwrap();
        let replaced = st.frame.replace(frame).is_some();
        if replaced {
            st.replaced += 1;
        }
        self.ready.notify_one();
        replaced
    }

    pub fn try_take(&self) -> Option<Vec<u8>> {
        self.slot.lock().unwrap().frame.take()
    }

    /// Waits up to `timeout` for a frame. `None` on timeout or close.
    pub fn take(&self, timeout: Duration) -> Option<Vec<u8>> {
        let mut st = self.slot.lock().unwrap();
        if st.frame.is_none() && !st.closed {
            st = self.ready.wait_timeout(st, timeout).unwrap().0;
        }
        st.frame.take()
    }

    pub fn close(&self) {
        self.slot.lock().unwrap().closed = true;
        self.ready.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.slot.lock().unwrap().closed
    }

    /// Frames discarded because a newer one arrived first.
    pub fn replaced(&self) -> u64 {
        self.slot.lock().unwrap().replaced
    }
}

/// Accepts only frames whose sequence number exceeds every one shown so far.
#[derive(Debug, Default, Clone)]
pub struct MediaReceiver {
    last: Option<u32>,
    accepted: u64,
    stale: u64,
}

impl MediaReceiver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accept(&mut self, seq: u32) -> bool {
        if self.last.is_some_and(|l| seq <= l) {
            self.stale += 1;
            return false;
        }
        self.last = Some(seq);
        self.accepted += 1;
        true
    }

    pub fn last(&self) -> Option<u32> {
        self.last
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn stale(&self) -> u64 {
        self.stale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_keeps_newest() {
        let s = MediaSlot::new();
        assert!(!s.offer(vec![1]));
        assert!(s.offer(vec![2]));
        assert_eq!(s.take(Duration::ZERO), Some(vec![2]));
        assert_eq!(s.try_take(), None);
        assert_eq!(s.replaced(), 1);
    }

    #[test]
    fn receiver_drops_stale_and_duplicates() {
        let mut r = MediaReceiver::new();
        let shown: Vec<u32> = [1, 3, 2, 3, 5, 4, 6].into_iter().filter(|&s| r.accept(s)).collect();
        assert_eq!(shown, [1, 3, 5, 6]);
        assert_eq!(r.stale(), 3);
    }
}
