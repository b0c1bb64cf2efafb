//! The edge configuration file: simulation tables plus `[stream]`.

use std::path::Path;

use gewu_sim::{CurriculumSchedule, SceneConfig, SimConfig, TrainerConfig, WorldConfig};
use serde::{Deserialize, Serialize};

use crate::EdgeError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StreamConfig {
    pub width: u16,
    pub height: u16,
    pub fps: u32,
    /// `raw` or `rle`.
    pub encoding: String,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            width: gewu_stream::DEFAULT_WIDTH,
            height: gewu_stream::DEFAULT_HEIGHT,
            fps: gewu_stream::DEFAULT_FPS,
            encoding: "rle".into(),
        }
    }
}

impl StreamConfig {
    pub fn encoding(&self) -> Result<gewu_stream::Encoding, EdgeError> {
        match self.encoding.as_str() {
            "raw" => Ok(gewu_stream::Encoding::Raw),
            "rle" => Ok(gewu_stream::Encoding::RunLength),
            other => Err(EdgeError::BadConfig(format!(
                "key `stream.encoding`: expected \"raw\" or \"rle\", got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EdgeConfig {
    pub world: WorldConfig,
    pub curriculum: CurriculumSchedule,
    pub trainer: TrainerConfig,
    pub scenes: SceneConfig,
    pub stream: StreamConfig,
}

impl EdgeConfig {
    pub fn parse(text: &str) -> Result<Self, EdgeError> {
        let cfg: EdgeConfig = toml::from_str(text).map_err(|e| EdgeError::BadConfig(e.to_string()))?;
        cfg.stream.encoding()?;
        if cfg.stream.width == 0 || cfg.stream.height == 0 {
            return Err(EdgeError::BadConfig("key `stream.width`/`stream.height`: must be positive".into()));
        }
        if cfg.stream.fps == 0 {
            return Err(EdgeError::BadConfig("key `stream.fps`: must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, EdgeError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EdgeError::BadConfig(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            EdgeError::BadConfig(m) => EdgeError::BadConfig(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            world: self.world.clone(),
            curriculum: self.curriculum.clone(),
            trainer: self.trainer.clone(),
            scenes: self.scenes.clone(),
        }
    }
}
