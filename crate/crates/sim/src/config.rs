//! TOML configuration for physics, reward, curriculum, trainer and scenes.
//!
//! Every table is optional and every key defaults; unknown keys are errors
//! so typos surface instead of being ignored.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curriculum::CurriculumSchedule;
use crate::trainer::TrainerConfig;
use crate::world::WorldConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    /// Hard cap on commanded speed, m/s.
    pub max_speed: f64,
    pub walk_speed: f64,
    pub run_speed: f64,
    pub cross_speed: f64,
    /// Trainer environment steps per main-loop tick while training.
    pub train_steps_per_tick: u64,
    /// Minimum spacing of samples on one telemetry stream (100 ms = 10/s).
    pub telemetry_interval_ms: u64,
    /// Where halted training runs write their checkpoint; none keeps it in memory.
    pub checkpoint_dir: Option<PathBuf>,
    /// Height-field bumps on the RoboHeTu strip, m.
    pub terrain_amplitude: f64,
    pub terrain_wavelength: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            max_speed: 1.5,
            walk_speed: 1.0,
            run_speed: 1.5,
            cross_speed: 0.6,
            train_steps_per_tick: 64,
            telemetry_interval_ms: 100,
            checkpoint_dir: None,
            terrain_amplitude: 0.04,
            terrain_wavelength: 0.8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub world: WorldConfig,
    pub curriculum: CurriculumSchedule,
    pub trainer: TrainerConfig,
    pub scenes: SceneConfig,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("bad config: {0}")]
pub struct ConfigError(pub String);

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    /// Divides the curriculum breakpoints by `factor`.
    pub fn compressed(mut self, factor: u64) -> Self {
        self.curriculum = self.curriculum.compressed(factor);
        self
    }
}
