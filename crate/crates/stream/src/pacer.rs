//! Frame-rate cap with newest-wins dropping.

use std::collections::VecDeque;

/// Holds at most one frame. A newer offer replaces an unsent one, and a
/// frame goes out only when the rate budget allows and the media path is
/// ready, so after a stall the first frame sent is the newest.
#[derive(Debug)]
pub struct Pacer<F> {
    fps: u32,
    last_sent_ms: Option<u64>,
    window: VecDeque<u64>,
    pending: Option<(u32, F)>,
    last_seq: Option<u32>,
    sent: u64,
    dropped: u64,
}

impl<F> Pacer<F> {
    /// # Panics
    /// If `fps` is zero.
    pub fn new(fps: u32) -> Self {
        assert!(fps > 0, "frame rate must be positive");
        Pacer {
            fps,
            last_sent_ms: None,
            window: VecDeque::new(),
            pending: None,
            last_seq: None,
            sent: 0,
            dropped: 0,
        }
    }

    pub fn fps(&self) -> u32 {
        self.fps
    }

    /// Whether the rate budget allows a send at `now_ms`: frames are at
    /// least `1000 / fps` whole milliseconds apart, and no 1-second window
    /// holds more than `fps` of them.
    pub fn budget_open(&mut self, now_ms: u64) -> bool {
        while self.window.front().is_some_and(|&t| t + 1000 <= now_ms) {
            self.window.pop_front();
        }
        let spaced = self
            .last_sent_ms
            .is_none_or(|t| now_ms.saturating_sub(t) >= 1000 / self.fps as u64);
        spaced && self.window.len() < self.fps as usize
    }

    /// Queues a rendered frame. Frames not newer than the last sent or
    /// queued one are discarded.
    pub fn offer(&mut self, seq: u32, frame: F) {
        let newest = self.pending.as_ref().map(|p| p.0).or(self.last_seq);
        if newest.is_some_and(|n| seq <= n) {
            self.dropped += 1;
            return;
        }
        if self.pending.replace((seq, frame)).is_some() {
            self.dropped += 1;
        }
    }

    /// The frame to send now, if any. `ready` is false while the media path
    /// is backed up.
    pub fn poll(&mut self, now_ms: u64, ready: bool) -> Option<(u32, F)> {
        if !ready || !self.budget_open(now_ms) {
            return None;
        }
        let (seq, f) = self.pending.take()?;
        self.last_sent_ms = Some(now_ms);
        self.window.push_back(now_ms);
        self.last_seq = Some(seq);
        self.sent += 1;
        Some((seq, f))
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}
