//! Scene orchestration: registry and aliases, the load state machine with
//! in-flight deduplication, deferred command replay, and routing of
//! scene-scoped commands to the active runtime.

mod director;
mod registry;
mod runtime;

pub use director::{DirectorConfig, DirectorError, DirectorStats, LoadOutcome, RouteOutcome, SceneDirector};
pub use registry::{RegistryError, SceneDescriptor, SceneFactory, SceneRegistry, SceneStatus};
pub use runtime::{Camera, Outbox, SceneError, SceneRuntime};
