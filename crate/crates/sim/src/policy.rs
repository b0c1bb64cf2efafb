//! Linear-tanh policies, the GWPL checkpoint format, and the named policy slot.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use thiserror::Error;

use crate::body::ACTION_DIM;
use crate::world::OBS_DIM;

pub const PARAM_COUNT: usize = ACTION_DIM * OBS_DIM;
pub const CHECKPOINT_MAGIC: [u8; 4] = *b"GWPL";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("bad checkpoint magic")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint has {found} parameters, expected {expected}")]
    ParamCount { found: usize, expected: usize },
    #[error("truncated checkpoint")]
    Truncated,
    #[error("unknown policy {0:?}")]
    UnknownPolicy(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `action = tanh(W · obs)`, W stored row-major (one row per actuator).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPolicy {
    pub params: Vec<f64>,
}

impl Default for LinearPolicy {
    fn default() -> Self {
        LinearPolicy {
            params: vec![0.0; PARAM_COUNT],
        }
    }
}

impl LinearPolicy {
    pub fn from_params(params: Vec<f64>) -> Result<Self, PolicyError> {
        if params.len() != PARAM_COUNT {
            return Err(PolicyError::ParamCount {
                found: params.len(),
                expected: PARAM_COUNT,
            });
        }
        Ok(LinearPolicy { params })
    }

    pub fn act(&self, obs: &[f64; OBS_DIM]) -> [f64; ACTION_DIM] {
        act_with(&self.params, obs)
    }

    /// GWPL: magic, u32 version, u32 count (little-endian), then `count`
    /// little-endian f32 parameters.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<(), PolicyError> {
        w.write_all(&CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(self.params.len() as u32).to_le_bytes())?;
        for p in &self.params {
            w.write_all(&(*p as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.params.len());
        self.write_checkpoint(&mut out).expect("vec write");
        out
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self, PolicyError> {
        let mut header = [0u8; 12];
        r.read_exact(&mut header).map_err(eof_as_truncated)?;
        if header[..4] != CHECKPOINT_MAGIC {
            return Err(PolicyError::BadMagic);
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(PolicyError::UnsupportedVersion(version));
        }
        let count = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        if count != PARAM_COUNT {
            return Err(PolicyError::ParamCount {
                found: count,
                expected: PARAM_COUNT,
            });
        }
        let mut params = Vec::with_capacity(count);
        let mut buf = [0u8; 4];
        for _ in 0..count {
            r.read_exact(&mut buf).map_err(eof_as_truncated)?;
            params.push(f32::from_le_bytes(buf) as f64);
        }
        Ok(LinearPolicy { params })
    }
}

fn eof_as_truncated(e: std::io::Error) -> PolicyError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        PolicyError::Truncated
    } else {
        PolicyError::Io(e)
    }
}

pub(crate) fn act_with(params: &[f64], obs: &[f64; OBS_DIM]) -> [f64; ACTION_DIM] {
    let mut out = [0.0; ACTION_DIM];
    for (i, a) in out.iter_mut().enumerate() {
        let row = &params[i * OBS_DIM..(i + 1) * OBS_DIM];
        let z: f64 = row.iter().zip(obs).map(|(w, o)| w * o).sum();
        *a = z.tanh();
    }
    out
}

/// Named pre-trained policies with one active entry.
#[derive(Debug, Clone)]
pub struct PolicySlot {
    policies: BTreeMap<String, LinearPolicy>,
    active: String,
}

impl PolicySlot {
    pub fn new(name: impl Into<String>, policy: LinearPolicy) -> Self {
        let name = name.into();
        let mut policies = BTreeMap::new();
        policies.insert(name.clone(), policy);
        PolicySlot {
            policies,
            active: name,
        }
    }

    /// The two shipped Playground checkpoints.
    pub fn shipped() -> Self {
        let mut slot = PolicySlot::new("stander-v0", stander_v0());
        slot.insert("walker-v1", walker_v1());
        slot
    }

    pub fn insert(&mut self, name: impl Into<String>, policy: LinearPolicy) {
        self.policies.insert(name.into(), policy);
    }

    pub fn active_name(&self) -> &str {
        &self.active
    }

    pub fn active(&self) -> &LinearPolicy {
        &self.policies[&self.active]
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.policies.keys().map(String::as_str)
    }

    /// Selects `name`; switching to the active policy is a no-op.
    pub fn switch(&mut self, name: &str) -> Result<&str, PolicyError> {
        if !self.policies.contains_key(name) {
            return Err(PolicyError::UnknownPolicy(name.to_string()));
        }
        if self.active != name {
            self.active = name.to_string();
        }
        Ok(&self.active)
    }
}

// Trained with the default world and trainer (seed 0, 200k steps, ÷50
// curriculum); the stander with the forward-velocity weight set to zero.
const STANDER_V0: [f64; PARAM_COUNT] = [
    -1.25152, -1.15204, 0.0559059, -1.36766, 0.151215, 0.478887,
    -0.0388319, 0.928303, 0.0692082, 1.00609, -0.124538, -0.0901619,
    1.12119, -0.953164, 0.403085, -0.99591, -0.027449, -0.145958,
    -0.754432, 1.27865, 0.0211312, 1.21052, 0.188346, -0.192845,
];

const WALKER_V1: [f64; PARAM_COUNT] = [
    -0.144848, -0.679948, 0.387606, -0.751847, -0.252779, 1.13862,
    0.208747, 0.412757, -0.0889598, 0.430222, -0.240492, 0.152281,
    1.04757, -0.220894, 0.770991, -0.246098, -0.87528, -0.108633,
    0.0627063, 0.223261, 0.109471, 0.115767, -0.726378, -0.22221,
];

/// Balances in place.
pub fn stander_v0() -> LinearPolicy {
    LinearPolicy { params: STANDER_V0.to_vec() }
}

/// Walks forward.
pub fn walker_v1() -> LinearPolicy {
    LinearPolicy { params: WALKER_V1.to_vec() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_layout() {
        let policy = LinearPolicy::from_params((0..PARAM_COUNT).map(|i| i as f64 * 0.5).collect()).unwrap();
        let bytes = policy.to_checkpoint_bytes();
        assert_eq!(&bytes[..4], b"GWPL");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), PARAM_COUNT as u32);
        assert_eq!(bytes.len(), 12 + 4 * PARAM_COUNT);
        assert_eq!(f32::from_le_bytes(bytes[16..20].try_into().unwrap()), 0.5);
        let back = LinearPolicy::read_checkpoint(&bytes[..]).unwrap();
        assert_eq!(back, policy);
    }

    #[test]
    fn checkpoint_errors() {
        let bytes = LinearPolicy::default().to_checkpoint_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(LinearPolicy::read_checkpoint(&bad[..]), Err(PolicyError::BadMagic)));
        assert!(matches!(
            LinearPolicy::read_checkpoint(&bytes[..bytes.len() - 1]),
            Err(PolicyError::Truncated)
        ));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(
            LinearPolicy::read_checkpoint(&v2[..]),
            Err(PolicyError::UnsupportedVersion(2))
        ));
        let mut count = bytes;
        count[8] = 3;
        assert!(matches!(
            LinearPolicy::read_checkpoint(&count[..]),
            Err(PolicyError::ParamCount { found: 3, .. })
        ));
    }

    fn rollout(policy: &LinearPolicy, seed: u64) -> (u32, f64) {
        use crate::curriculum::CurriculumSchedule;
        use crate::world::{World, WorldConfig};
        let mut w = World::new(WorldConfig::default(), CurriculumSchedule::default(), seed);
        let start = w.body.torso(&w.cfg.body)[0];
        loop {
            let a = policy.act(&w.observe());
            if w.step(&a, 0.0).terminal.is_some() {
                return (w.episode_step, w.body.torso(&w.cfg.body)[0] - start);
            }
        }
    }

    #[test]
    fn shipped_policies_balance_and_differ() {
        let (mut stand_full, mut walk_full) = (0, 0);
        let (mut stand_dx, mut walk_dx) = (0.0, 0.0);
        for seed in 0..10 {
            let (len, dx) = rollout(&stander_v0(), seed);
            stand_full += u32::from(len == 1000);
            stand_dx += dx / 10.0;
            let (len, dx) = rollout(&walker_v1(), seed);
            walk_full += u32::from(len == 1000);
            walk_dx += dx / 10.0;
        }
        assert!(stand_full >= 8, "stander full episodes {stand_full}/10");
        assert!(walk_full >= 8, "walker full episodes {walk_full}/10");
        assert!(walk_dx > 5.0 && walk_dx > 3.0 * stand_dx.abs(), "walk {walk_dx} stand {stand_dx}");
    }

    #[test]
    fn slot_switching() {
        let mut slot = PolicySlot::shipped();
        assert_eq!(slot.active_name(), "stander-v0");
        assert_eq!(slot.switch("walker-v1").unwrap(), "walker-v1");
        assert_eq!(slot.switch("walker-v1").unwrap(), "walker-v1");
        assert!(matches!(slot.switch("nope"), Err(PolicyError::UnknownPolicy(_))));
        assert_eq!(slot.active_name(), "walker-v1");
    }
}
