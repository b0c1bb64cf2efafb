//! Rate-limited telemetry: at most one sample per stream per interval,
//! newest wins, steps never go backwards.

use std::collections::BTreeMap;

use gewu_protocol::{types, Payload};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct TelemetrySample {
    /// Envelope type, e.g. `telemetry.reward`.
    pub stream: &'static str,
    /// Global training step.
    pub step: u64,
    pub value: f64,
    /// Stream-specific extra fields.
    pub extra: Payload,
}

impl TelemetrySample {
    pub fn new(stream: &'static str, step: u64, value: f64) -> Self {
        TelemetrySample {
            stream,
            step,
            value,
            extra: Payload::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.extra.insert(key.to_string(), value.into());
        self
    }

    pub fn payload(&self) -> Payload {
        let mut p = self.extra.clone();
        p.insert("step".into(), Value::from(self.step));
        p.insert("value".into(), Value::from(self.value));
        p
    }
}

pub const STREAMS: [&str; 3] = [
    types::TELEMETRY_REWARD,
    types::TELEMETRY_EPISODE,
    types::TELEMETRY_CURRICULUM,
];

#[derive(Debug, Default)]
struct StreamState {
    last_sent_ms: Option<u64>,
    last_step: Option<u64>,
    pending: Option<TelemetrySample>,
}

/// Per-stream limiter driven by simulation time.
#[derive(Debug)]
pub struct TelemetryLimiter {
    interval_ms: u64,
    streams: BTreeMap<&'static str, StreamState>,
    superseded: u64,
}

impl TelemetryLimiter {
    /// `interval_ms = 100` gives the 10 samples/s cap.
    pub fn new(interval_ms: u64) -> Self {
        TelemetryLimiter {
            interval_ms,
            streams: BTreeMap::new(),
            superseded: 0,
        }
    }

    /// Offers a sample at `now_ms`; returns it if it may be sent right away.
    /// Otherwise it replaces any pending sample of the same stream. Samples
    /// with a step below the stream's last one are discarded.
    pub fn offer(&mut self, sample: TelemetrySample, now_ms: u64) -> Option<TelemetrySample> {
        let interval = self.interval_ms;
        let st = self.streams.entry(sample.stream).or_default();
        let floor = st.pending.as_ref().map(|p| p.step).or(st.last_step);
        if floor.is_some_and(|f| sample.step < f) {
            self.superseded += 1;
            return None;
        }
        let due = st.last_sent_ms.is_none_or(|t| now_ms >= t + interval);
        if due {
            if st.pending.take().is_some() {
                self.superseded += 1;
            }
            st.last_sent_ms = Some(now_ms);
            st.last_step = Some(sample.step);
            Some(sample)
        } else {
            if st.pending.replace(sample).is_some() {
                self.superseded += 1;
            }
            None
        }
    }

    /// Pending samples whose stream interval has elapsed by `now_ms`.
    pub fn flush_due(&mut self, now_ms: u64) -> Vec<TelemetrySample> {
        let interval = self.interval_ms;
        let mut out = Vec::new();
        for st in self.streams.values_mut() {
            let due = st.last_sent_ms.is_none_or(|t| now_ms >= t + interval);
            if due {
                if let Some(s) = st.pending.take() {
                    st.last_sent_ms = Some(now_ms);
                    st.last_step = Some(s.step);
                    out.push(s);
                }
            }
        }
        out
    }

    /// Samples replaced by a newer one before they could be sent.
    pub fn superseded(&self) -> u64 {
        self.superseded
    }
}
