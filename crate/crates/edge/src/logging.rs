//! Line-delimited JSON records: one object per line, for greppable runs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use gewu_protocol::Envelope;
use serde_json::{json, Map, Value};

/// An append-only sink of JSON records.
pub struct EventLog {
    out: Mutex<Box<dyn Write + Send>>,
}

impl EventLog {
    pub fn to_writer(w: impl Write + Send + 'static) -> Self {
        EventLog { out: Mutex::new(Box::new(w)) }
    }

    pub fn create(path: &Path) -> std::io::Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Self::to_writer(BufWriter::new(File::create(path)?)))
    }

    pub fn sink() -> Self {
        Self::to_writer(std::io::sink())
    }

    /// Writes `{"t": t_ms, "event": event, ..fields}`.
    pub fn record(&self, t_ms: u64, event: &str, fields: Value) {
        let mut obj = Map::new();
        obj.insert("t".into(), json!(t_ms));
        obj.insert("event".into(), json!(event));
        if let Value::Object(m) = fields {
            obj.extend(m);
        }
        self.write_line(&Value::Object(obj));
    }

    /// Writes the envelope itself as one line.
    pub fn envelope(&self, env: &Envelope) {
        match serde_json::to_value(env) {
            Ok(v) => self.write_line(&v),
            Err(e) => log::warn!("unserializable envelope {}: {e}", env.id),
        }
    }

    pub fn flush(&self) {
        let _ = self.out.lock().unwrap().flush();
    }

    fn write_line(&self, v: &Value) {
        let mut out = self.out.lock().unwrap();
        let _ = serde_json::to_writer(&mut *out, v);
        let _ = out.write_all(b"\n");
    }
}

impl Drop for EventLog {
    fn drop(&mut self) {
        self.flush();
    }
}

struct JsonLogger {
    level: log::LevelFilter,
}

impl log::Log for JsonLogger {
    fn enabled(&self, m: &log::Metadata) -> bool {
        m.level() <= self.level
    }

    fn log(&self, r: &log::Record) {
        if !self.enabled(r.metadata()) {
            return;
        }
        let ts = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
        let line = json!({
            "ts": ts,
            "level": r.level().as_str().to_ascii_lowercase(),
            "target": r.target(),
            "msg": r.args().to_string(),
        });
        eprintln!("{line}");
    }

    fn flush(&self) {}
}

/// Installs the process-wide JSON logger on stderr. Later calls are no-ops.
pub fn init(level: log::LevelFilter) {
    if log::set_boxed_logger(Box::new(JsonLogger { level })).is_ok() {
        log::set_max_level(level);
    }
}

pub fn parse_level(s: &str) -> Option<log::LevelFilter> {
    s.parse().ok()
}
