//! A line-oriented command script for headless clients and offline runs.
//!
//! ```text
//! # comments and blank lines are ignored
//! load RoboHeTu               # scene.load {scene}
//! move 1 0 1.2 run            # control.move {dir, speed, mode}; mode defaults to walk
//! stop                        # control.move with zero speed
//! train on [TinkerCoin]       # training.set_flag {training, scene?}
//! policy walker-v1            # policy.switch {policy}
//! send lamp.toggle {"on":true}  # any type with a JSON object payload
//! wait 500ms                  # also `2s`; a bare number is milliseconds
//! ```

use gewu_protocol::{is_valid_type, types, Payload};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Send { kind: String, payload: Payload },
    Wait(u64),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("script line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Script {
    pub steps: Vec<Step>,
}

fn obj(v: Value) -> Payload {
    match v {
        Value::Object(m) => m,
        _ => Payload::new(),
    }
}

pub fn parse_duration_ms(s: &str) -> Option<u64> {
    let (num, scale) = if let Some(n) = s.strip_suffix("ms") {
        (n, 1.0)
    } else if let Some(n) = s.strip_suffix('s') {
        (n, 1000.0)
    } else {
        (s, 1.0)
    };
    let v: f64 = num.parse().ok()?;
    (v.is_finite() && v >= 0.0).then(|| (v * scale).round() as u64)
}

impl Script {
    pub fn parse(text: &str) -> Result<Script, ScriptError> {
        let mut steps = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| ScriptError { line, message };
            let content = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
            // `send` payloads may contain '#', so re-split those from the raw line.
            let content = if content.starts_with("send ") { raw.trim() } else { content };
            if content.is_empty() {
                continue;
            }
            let mut words = content.split_whitespace();
            let verb = words.next().unwrap();
            let args: Vec<&str> = words.collect();
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("expected a number, got {s:?}")));
            let step = match (verb, args.as_slice()) {
                ("load", [scene]) => send(types::SCENE_LOAD, json!({ "scene": scene })),
                ("move", [dx, dy, speed, rest @ ..]) if rest.len() <= 1 => {
                    let mode = rest.first().copied().unwrap_or("walk");
                    if !["walk", "run", "cross"].contains(&mode) {
                        return Err(err(format!("unknown mode {mode:?}")));
                    }
                    send(
                        types::CONTROL_MOVE,
                        json!({"dir": [num(dx)?, num(dy)?], "speed": num(speed)?, "mode": mode}),
                    )
                }
                ("stop", []) => send(types::CONTROL_MOVE, json!({"dir": [0.0, 0.0], "speed": 0.0, "mode": "walk"})),
                ("train", [flag, rest @ ..]) if rest.len() <= 1 => {
                    let on = match *flag {
                        "on" => true,
                        "off" => false,
                        other => return Err(err(format!("expected on/off, got {other:?}"))),
                    };
                    let mut p = json!({ "training": on });
                    if let Some(scene) = rest.first() {
                        p["scene"] = json!(scene);
                    }
                    send(types::TRAINING_SET_FLAG, p)
                }
                ("policy", [name]) => send(types::POLICY_SWITCH, json!({ "policy": name })),
                ("send", [kind, ..]) => {
                    if !is_valid_type(kind) {
                        return Err(err(format!("invalid message type {kind:?}")));
                    }
                    let rest = content["send".len()..].trim_start()[kind.len()..].trim();
                    let payload: Value = if rest.is_empty() {
                        json!({})
                    } else {
                        serde_json::from_str(rest).map_err(|e| err(format!("payload: {e}")))?
                    };
                    if !payload.is_object() {
                        return Err(err("payload must be a JSON object".into()));
                    }
                    send(kind, payload)
                }
                ("wait", [d]) => Step::Wait(parse_duration_ms(d).ok_or_else(|| err(format!("bad duration {d:?}")))?),
                _ => return Err(err(format!("cannot parse {content:?}"))),
            };
            steps.push(step);
        }
        Ok(Script { steps })
    }

    /// Total waiting time.
    pub fn duration_ms(&self) -> u64 {
        self.steps
            .iter()
            .map(|s| match s {
                Step::Wait(ms) => *ms,
                Step::Send { .. } => 0,
            })
            .sum()
    }
}

fn send(kind: &str, payload: Value) -> Step {
    Step::Send {
        kind: kind.to_string(),
        payload: obj(payload),
    }
}

/// Walks a script against a clock: [`due`](Cursor::due) returns the
/// messages whose time has come.
#[derive(Debug, Clone)]
pub struct Cursor {
    steps: Vec<Step>,
    next: usize,
    resume_at: u64,
}

impl Cursor {
    pub fn new(script: &Script, start_ms: u64) -> Self {
        Cursor {
            steps: script.steps.clone(),
            next: 0,
            resume_at: start_ms,
        }
    }

    pub fn due(&mut self, now_ms: u64) -> Vec<(String, Payload)> {
        let mut out = Vec::new();
        while self.next < self.steps.len() && now_ms >= self.resume_at {
            match &self.steps[self.next] {
                Step::Send { kind, payload } => out.push((kind.clone(), payload.clone())),
                Step::Wait(ms) => self.resume_at += ms,
            }
            self.next += 1;
        }
        out
    }

    pub fn finished(&self, now_ms: u64) -> bool {
        self.next >= self.steps.len() && now_ms >= self.resume_at
    }
}
