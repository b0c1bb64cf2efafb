//! Scene runtime: the toy biped, the curriculum assist force, scenes, and
//! the trainer.

pub mod body;
pub mod config;
pub mod curriculum;
pub mod policy;
pub mod scenes;
pub mod telemetry;
pub mod trainer;
pub mod world;

pub use body::{BodyParams, RobotBody, ACTION_DIM};
pub use config::{ConfigError, SceneConfig, SimConfig};
pub use curriculum::{assist_force, lambda_at, CurriculumSchedule};
pub use policy::{LinearPolicy, PolicyError, PolicySlot};
pub use scenes::{register_builtin, ControlState, MoveMode, Playground, RoboHeTu, SceneView, SimScene, TinkerCoin};
pub use telemetry::{TelemetryLimiter, TelemetrySample};
pub use trainer::{milestone_step, reward_sign_change, Trainer, TrainerConfig};
pub use world::{EpisodeRecord, TerminalCause, World, WorldConfig};
