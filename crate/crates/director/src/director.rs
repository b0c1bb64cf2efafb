use gewu_protocol::{types, CommandClass, CommandTaxonomy, DispatchTable, Envelope, IdGenerator, Payload};
use log::{debug, info, warn};
use serde_json::Value;
use thiserror::Error;

use crate::registry::{RegistryError, SceneFactory, SceneRegistry, SceneStatus};
use crate::runtime::{Camera, Outbox, SceneError, SceneRuntime};

#[derive(Debug, Clone)]
pub struct DirectorConfig {
    /// Simulated scene load time.
    pub load_delay_ms: u64,
    /// Bound on commands deferred behind one load.
    pub deferred_cap: usize,
}

impl Default for DirectorConfig {
    fn default() -> Self {
        DirectorConfig {
            load_delay_ms: 300,
            deferred_cap: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DirectorError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("no scene is active yet")]
    NoActiveScene,
    #[error("unknown command type {0:?}")]
    UnknownType(String),
    #[error("type {0:?} is already registered")]
    DuplicateType(String),
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
}

impl DirectorError {
    pub fn code(&self) -> &str {
        match self {
            DirectorError::Registry(e) => e.code(),
            DirectorError::Scene(e) => e.code(),
            DirectorError::NoActiveScene => "no_active_scene",
            DirectorError::UnknownType(_) => "unknown_type",
            DirectorError::DuplicateType(_) => "duplicate_type",
            DirectorError::InvalidPayload(_) => "invalid_payload",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadOutcome {
    Accepted,
    DuplicateIgnored,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RouteOutcome {
    /// A `scene.load` consumed by the director.
    Load(LoadOutcome),
    /// Delivered to the active scene.
    Handled,
    /// Held until the loading scene activates.
    Deferred,
    /// Refused; a `protocol.error` reply is in the outbox.
    Error(DirectorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Route {
    Load,
    Scene,
    Unknown,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DirectorStats {
    pub loads_started: u64,
    pub loads_completed: u64,
    pub loads_cancelled: u64,
    pub duplicates_ignored: u64,
    pub handled: u64,
    pub replayed: u64,
    /// Deferred commands dropped by the cap or because their load was cancelled.
    pub deferred_dropped: u64,
    pub errors: u64,
}

#[derive(Debug, Clone, Copy)]
struct Loading {
    idx: usize,
    ready_at: u64,
}

/// Owns scene lifecycle and is the single entry point for inbound commands.
///
/// The current scene stays Active while the next one loads; the swap happens
/// inside one [`tick`](Self::tick), so exactly one scene is Active at every
/// observable instant after bootstrap. Time is supplied by the caller.
pub struct SceneDirector<S: ?Sized + SceneRuntime> {
    cfg: DirectorConfig,
    registry: SceneRegistry<S>,
    taxonomy: CommandTaxonomy,
    table: DispatchTable<Route>,
    active: Option<usize>,
    loading: Option<Loading>,
    /// Desired scene after the in-flight load completes (latest intent wins).
    queued: Option<usize>,
    camera: Camera,
    outbox: Outbox,
    now: u64,
    stats: DirectorStats,
}

impl<S: ?Sized + SceneRuntime> SceneDirector<S> {
    pub fn new(cfg: DirectorConfig, ids: IdGenerator) -> Self {
        let mut table = DispatchTable::new(Route::Unknown);
        table.register(types::SCENE_LOAD, Route::Load).expect("fresh table");
        for kind in [types::CONTROL_MOVE, types::TRAINING_SET_FLAG, types::POLICY_SWITCH] {
            table.register(kind, Route::Scene).expect("fresh table");
        }
        SceneDirector {
            cfg,
            registry: SceneRegistry::new(),
            taxonomy: CommandTaxonomy::builtin(),
            table,
            active: None,
            loading: None,
            queued: None,
            camera: Camera::default(),
            outbox: Outbox::new(ids),
            now: 0,
            stats: DirectorStats::default(),
        }
    }

    pub fn register<I, A>(
        &mut self,
        canonical: &str,
        aliases: I,
        factory: SceneFactory<S>,
    ) -> Result<(), RegistryError>
    where
        I: IntoIterator<Item = A>,
        A: Into<String>,
    {
        self.registry.register(canonical, aliases, factory)
    }

    /// Adds a scene-scoped command type. This is the only dispatch change a
    /// new scene may need.
    pub fn register_command(&mut self, kind: &str, class: CommandClass) -> Result<(), DirectorError> {
        if self.table.contains(kind) {
            return Err(DirectorError::DuplicateType(kind.to_string()));
        }
        if self.taxonomy.classify(kind).is_err() {
            self.taxonomy
                .register(kind, class)
                .map_err(|_| DirectorError::DuplicateType(kind.to_string()))?;
        }
        self.table
            .register(kind, Route::Scene)
            .map_err(|_| DirectorError::DuplicateType(kind.to_string()))
    }

    pub fn resolve(&self, name: &str) -> Result<&str, RegistryError> {
        self.registry.resolve(name)
    }

    pub fn registry(&self) -> &SceneRegistry<S> {
        &self.registry
    }

    pub fn taxonomy(&self) -> &CommandTaxonomy {
        &self.taxonomy
    }

    pub fn camera(&self) -> &Camera {
        &self.camera
    }

    pub fn camera_mut(&mut self) -> &mut Camera {
        &mut self.camera
    }

    pub fn stats(&self) -> DirectorStats {
        self.stats
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn status(&self, name: &str) -> Option<SceneStatus> {
        self.registry.get(name).map(|d| d.status)
    }

    pub fn active_name(&self) -> Option<&str> {
        self.active.map(|i| self.registry.at(i).canonical.as_str())
    }

    pub fn loading_name(&self) -> Option<&str> {
        self.loading.map(|l| self.registry.at(l.idx).canonical.as_str())
    }

    pub fn queued_name(&self) -> Option<&str> {
        self.queued.map(|i| self.registry.at(i).canonical.as_str())
    }

    pub fn active(&self) -> Option<&S> {
        self.active.and_then(|i| self.registry.at(i).runtime.as_deref())
    }

    pub fn active_mut(&mut self) -> Option<&mut S> {
        let i = self.active?;
        self.registry.at_mut(i).runtime.as_deref_mut()
    }

    /// The active runtime together with the outbox, for main-loop stepping.
    pub fn active_and_outbox(&mut self) -> (Option<&mut S>, &mut Outbox) {
        let rt = match self.active {
            Some(i) => self.registry.at_mut(i).runtime.as_deref_mut(),
            None => None,
        };
        (rt, &mut self.outbox)
    }

    pub fn outbox_mut(&mut self) -> &mut Outbox {
        &mut self.outbox
    }

    pub fn drain_outbox(&mut self) -> Vec<Envelope> {
        self.outbox.drain()
    }

    /// Loads a scene synchronously, bypassing the simulated delay. Used for
    /// a configured default scene at boot.
    pub fn bootstrap(&mut self, name: &str, now: u64) -> Result<(), DirectorError> {
        let idx = self.registry.index_of(name)?;
        self.set_now(now);
        if self.active == Some(idx) {
            return Ok(());
        }
        self.start_load(idx, now);
        self.complete_load(now);
        Ok(())
    }

    /// Completes every load whose delay has elapsed by `now`.
    pub fn tick(&mut self, now: u64) {
        self.set_now(now);
        while let Some(l) = self.loading {
            if l.ready_at > now {
                break;
            }
            self.outbox.set_now(l.ready_at);
            self.complete_load(l.ready_at);
            self.outbox.set_now(now);
        }
    }

    /// Single entry point for inbound commands, whether from the network
    /// or a local console.
    pub fn route(&mut self, env: Envelope, now: u64) -> RouteOutcome {
        self.tick(now);
        match *self.table.resolve(&env.kind).0 {
            Route::Load => {
                let Some(scene) = env.payload_str("scene").map(str::to_string) else {
                    return self.fail(&env, DirectorError::InvalidPayload("scene.load needs a string \"scene\"".into()));
                };
                match self.request_load(&scene, now) {
                    Ok(outcome) => RouteOutcome::Load(outcome),
                    Err(e) => self.fail(&env, e),
                }
            }
            Route::Scene => {
                if let Some(l) = self.loading {
                    self.defer(l.idx, env);
                    return RouteOutcome::Deferred;
                }
                let Some(i) = self.active else {
                    return self.fail(&env, DirectorError::NoActiveScene);
                };
                match self.deliver(i, &env) {
                    Ok(()) => RouteOutcome::Handled,
                    Err(e) => self.fail(&env, e.into()),
                }
            }
            Route::Unknown => {
                let kind = env.kind.clone();
                self.fail(&env, DirectorError::UnknownType(kind))
            }
        }
    }

    /// Applies a load intent. The effective target is the queued scene, else
    /// the loading one, else the active one; asking for it again is a no-op.
    pub fn request_load(&mut self, name: &str, now: u64) -> Result<LoadOutcome, DirectorError> {
        let idx = self.registry.index_of(name)?;
        let effective = self.queued.or(self.loading.map(|l| l.idx)).or(self.active);
        if effective == Some(idx) {
            self.stats.duplicates_ignored += 1;
            debug!("scene.load {name}: duplicate ignored");
            return Ok(LoadOutcome::DuplicateIgnored);
        }
        match self.loading {
            None => self.start_load(idx, now),
            Some(l) if l.idx == idx => self.queued = None,
            Some(_) if self.active == Some(idx) => {
                self.queued = None;
                self.cancel_load();
            }
            Some(_) => self.queued = Some(idx),
        }
        Ok(LoadOutcome::Accepted)
    }

    fn set_now(&mut self, now: u64) {
        self.now = self.now.max(now);
        self.outbox.set_now(self.now);
    }

    fn start_load(&mut self, idx: usize, now: u64) {
        let desc = self.registry.at_mut(idx);
        desc.status = SceneStatus::Loading;
        let name = desc.canonical.clone();
        self.loading = Some(Loading {
            idx,
            ready_at: now + self.cfg.load_delay_ms,
        });
        self.stats.loads_started += 1;
        info!("scene {name}: loading");
        self.emit_status(&name, SceneStatus::Loading);
    }

    fn cancel_load(&mut self) {
        let Some(l) = self.loading.take() else { return };
        let desc = self.registry.at_mut(l.idx);
        desc.status = SceneStatus::Unloaded;
        let dropped = desc.deferred.len() as u64;
        desc.deferred.clear();
        let name = desc.canonical.clone();
        if dropped > 0 {
            warn!("scene {name}: load cancelled, dropping {dropped} deferred commands");
        }
        self.stats.deferred_dropped += dropped;
        self.stats.loads_cancelled += 1;
        self.emit_status(&name, SceneStatus::Unloaded);
    }

    fn complete_load(&mut self, at: u64) {
        let Some(l) = self.loading.take() else { return };

        if let Some(old) = self.active.take() {
            let desc = self.registry.at_mut(old);
            desc.status = SceneStatus::Unloading;
            if let Some(mut rt) = desc.runtime.take() {
                rt.on_deactivate(&mut self.outbox);
            }
            desc.status = SceneStatus::Unloaded;
            let name = desc.canonical.clone();
            self.emit_status(&name, SceneStatus::Unloaded);
        }

        let desc = self.registry.at_mut(l.idx);
        let mut rt = (desc.factory)();
        rt.sync_camera(&mut self.camera);
        rt.on_activate(&mut self.outbox);
        desc.runtime = Some(rt);
        desc.status = SceneStatus::Active;
        desc.loads += 1;
        let name = desc.canonical.clone();
        let deferred = std::mem::take(&mut desc.deferred);
        self.active = Some(l.idx);
        self.stats.loads_completed += 1;
        info!("scene {name}: active, replaying {} deferred", deferred.len());
        self.emit_status(&name, SceneStatus::Active);

        for env in deferred {
            self.stats.replayed += 1;
            if let Err(e) = self.deliver(l.idx, &env) {
                self.fail(&env, e.into());
            }
        }

        if let Some(q) = self.queued.take() {
            if q != l.idx {
                self.start_load(q, at);
            }
        }
    }

    fn deliver(&mut self, idx: usize, env: &Envelope) -> Result<(), SceneError> {
        let desc = self.registry.at_mut(idx);
        let rt = desc.runtime.as_deref_mut().expect("active scene is bound");
        self.stats.handled += 1;
        rt.handle(env, &mut self.outbox)
    }

    fn defer(&mut self, idx: usize, env: Envelope) {
        let cap = self.cfg.deferred_cap;
        let taxonomy = &self.taxonomy;
        let desc = self.registry.at_mut(idx);
        desc.deferred.push_back(env);
        while desc.deferred.len() > cap {
            let victim = desc
                .deferred
                .iter()
                .position(|e| taxonomy.class_or_intent(&e.kind) == CommandClass::Snapshot)
                .unwrap_or(0);
            let dropped = desc.deferred.remove(victim);
            self.stats.deferred_dropped += 1;
            if let Some(d) = dropped {
                debug!("deferred queue full, dropped {} {}", d.kind, d.id);
            }
        }
    }

    fn fail(&mut self, env: &Envelope, err: DirectorError) -> RouteOutcome {
        self.stats.errors += 1;
        debug!("{} {} refused: {err}", env.kind, env.id);
        let mut payload = Payload::new();
        payload.insert("code".into(), Value::from(err.code()));
        payload.insert("message".into(), Value::from(err.to_string()));
        payload.insert("ref".into(), Value::from(env.id.clone()));
        self.outbox.emit(types::PROTOCOL_ERROR, payload);
        RouteOutcome::Error(err)
    }

    fn emit_status(&mut self, scene: &str, status: SceneStatus) {
        let mut payload = Payload::new();
        payload.insert("scene".into(), Value::from(scene));
        payload.insert("status".into(), Value::from(status.as_str()));
        self.outbox.emit(types::SCENE_STATUS, payload);
    }
}
