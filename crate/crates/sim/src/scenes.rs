//! The three built-in scenes and their registration with the director.

use std::path::PathBuf;

use gewu_director::{Camera, Outbox, RegistryError, SceneDirector, SceneError, SceneRuntime};
use gewu_protocol::{types, Envelope, Payload};
use log::{info, warn};
use serde_json::Value;

use crate::body::ACTION_DIM;
use crate::config::{SceneConfig, SimConfig};
use crate::curriculum::{assist_force, lambda_at};
use crate::policy::{stander_v0, walker_v1, LinearPolicy, PolicySlot};
use crate::telemetry::{TelemetryLimiter, TelemetrySample};
use crate::trainer::Trainer;
use crate::world::{EpisodeRecord, TerminalCause, World};

pub const PLAYGROUND: &str = "Playground";
pub const ROBOHETU: &str = "RoboHeTu";
pub const TINKERCOIN: &str = "TinkerCoin";

/// Everything the renderer needs from a scene, in world coordinates
/// (x forward, y lateral, z up).
#[derive(Debug, Clone, PartialEq)]
pub struct SceneView {
    pub scene: &'static str,
    pub foot: [f64; 3],
    pub torso: [f64; 3],
    pub upright: bool,
    pub coins: Vec<[f64; 2]>,
    pub lambda: f64,
    /// Assist force, N.
    pub assist: [f64; 3],
    /// Ground profile as (x, z) points; empty means flat ground at z = 0.
    pub terrain: Vec<[f64; 2]>,
}

impl SceneView {
    fn of(scene: &'static str, world: &World, lambda: f64) -> Self {
        let p = &world.cfg.body;
        let b = &world.body;
        SceneView {
            scene,
            foot: [b.foot[0], b.foot[1], b.foot_z],
            torso: b.torso(p),
            upright: b.upright,
            coins: world.coins.iter().map(|c| c.pos).collect(),
            lambda,
            assist: assist_force(b.mass, b.heading, lambda, &world.sched),
            terrain: Vec::new(),
        }
    }
}

/// A scene the edge main loop can step and render.
pub trait SimScene: SceneRuntime {
    fn name(&self) -> &'static str;
    /// One fixed physics tick.
    fn step(&mut self, out: &mut Outbox);
    fn view(&self) -> SceneView;
    /// The last applied movement command.
    fn control(&self) -> &ControlState;
    /// Training episodes finished in this scene, in order.
    fn records(&self) -> &[EpisodeRecord] {
        &[]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveMode {
    Walk,
    Run,
    Cross,
}

impl MoveMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "walk" => Some(MoveMode::Walk),
            "run" => Some(MoveMode::Run),
            "cross" => Some(MoveMode::Cross),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MoveMode::Walk => "walk",
            MoveMode::Run => "run",
            MoveMode::Cross => "cross",
        }
    }

    fn preset(self, cfg: &SceneConfig) -> f64 {
        match self {
            MoveMode::Walk => cfg.walk_speed,
            MoveMode::Run => cfg.run_speed,
            MoveMode::Cross => cfg.cross_speed,
        }
    }
}

/// Applied `control.move` state. Later snapshots overwrite earlier ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlState {
    /// Unit vector, or zero when stopped.
    pub dir: [f64; 2],
    /// m/s after clamping.
    pub speed: f64,
    pub mode: MoveMode,
    /// Id of the envelope that set this state.
    pub from: Option<String>,
}

impl Default for ControlState {
    fn default() -> Self {
        ControlState {
            dir: [0.0, 0.0],
            speed: 0.0,
            mode: MoveMode::Walk,
            from: None,
        }
    }
}

impl ControlState {
    /// Parses a `control.move` payload `{dir: [x, y], speed, mode}`.
    /// Out-of-range speeds are clamped; malformed fields are errors.
    pub fn from_envelope(env: &Envelope, cfg: &SceneConfig) -> Result<Self, SceneError> {
        let bad = |m: &str| SceneError::InvalidPayload(format!("control.move: {m}"));
        let dir = env
            .payload
            .get("dir")
            .and_then(Value::as_array)
            .filter(|a| a.len() == 2)
            .ok_or_else(|| bad("dir must be [x, y]"))?;
        let (x, y) = match (dir[0].as_f64(), dir[1].as_f64()) {
            (Some(x), Some(y)) if x.is_finite() && y.is_finite() => (x, y),
            _ => return Err(bad("dir must be two finite numbers")),
        };
        let speed = env.payload_f64("speed").ok_or_else(|| bad("speed must be a number"))?;
        let mode = match env.payload.get("mode") {
            None => MoveMode::Walk,
            Some(m) => m.as_str().and_then(MoveMode::parse).ok_or_else(|| bad("mode must be walk|run|cross"))?,
        };
        let norm = x.hypot(y);
        let (dir, speed) = if norm > 1e-9 && speed.is_finite() && speed > 0.0 {
            let cap = cfg.max_speed.min(mode.preset(cfg));
            ([x / norm, y / norm], speed.min(cap))
        } else {
            ([0.0, 0.0], 0.0)
        };
        Ok(ControlState {
            dir,
            speed,
            mode,
            from: Some(env.id.clone()),
        })
    }

    fn heading(&self) -> Option<f64> {
        (self.speed > 0.0).then(|| self.dir[1].atan2(self.dir[0]))
    }
}

fn unsupported(scene: &str, env: &Envelope) -> SceneError {
    SceneError::Unsupported {
        scene: scene.to_string(),
        kind: env.kind.clone(),
    }
}

fn emit_status(out: &mut Outbox, scene: &str, extra: &[(&str, Value)]) {
    let mut p = Payload::new();
    p.insert("scene".into(), Value::from(scene));
    p.insert("status".into(), Value::from("active"));
    for (k, v) in extra {
        p.insert((*k).into(), v.clone());
    }
    out.emit(types::SCENE_STATUS, p);
}

/// Shared episode bookkeeping for the inference scenes.
struct Inference {
    world: World,
    control: ControlState,
    limiter: TelemetryLimiter,
    ticks: u64,
    episodes: u64,
}

impl Inference {
    fn new(world: World, cfg: &SceneConfig) -> Self {
        Inference {
            world,
            control: ControlState::default(),
            limiter: TelemetryLimiter::new(cfg.telemetry_interval_ms),
            ticks: 0,
            episodes: 0,
        }
    }

    fn sim_ms(&self) -> u64 {
        (self.ticks as f64 * self.world.cfg.dt * 1000.0) as u64
    }

    fn step(&mut self, action: &[f64; ACTION_DIM], out: &mut Outbox) -> bool {
        if let Some(h) = self.control.heading() {
            let p = self.world.cfg.body.clone();
            self.world.body.turn_toward(h, &p, self.world.cfg.dt);
        }
        let res = self.world.step(action, 0.0);
        self.ticks += 1;
        let now = self.sim_ms();
        let stepped = res.tick.stepped;
        if let Some(cause) = res.terminal {
            let len = self.world.episode_step;
            let sample = TelemetrySample::new(types::TELEMETRY_EPISODE, self.ticks, len as f64)
                .with("cause", cause_str(cause))
                .with("episode", self.episodes);
            self.episodes += 1;
            if let Some(s) = self.limiter.offer(sample, now) {
                out.emit(s.stream, s.payload());
            }
            self.world.reset();
        }
        for s in self.limiter.flush_due(now) {
            out.emit(s.stream, s.payload());
        }
        stepped
    }
}

fn cause_str(c: TerminalCause) -> &'static str {
    match c {
        TerminalCause::Fell => "fell",
        TerminalCause::Horizon => "horizon",
        TerminalCause::Reset => "reset",
    }
}

fn inference_world(cfg: &SimConfig, seed: u64) -> World {
    let mut wc = cfg.world.clone();
    wc.coins.count = 0;
    World::new(wc, cfg.curriculum.clone(), seed)
}

// Playground ------------------------------------------------------------------

/// Streams a pre-trained policy; `policy.switch {policy}` swaps it live.
pub struct Playground {
    inner: Inference,
    slot: PolicySlot,
}

impl Playground {
    pub fn new(cfg: &SimConfig, seed: u64) -> Self {
        Playground {
            inner: Inference::new(inference_world(cfg, seed), &cfg.scenes),
            slot: PolicySlot::shipped(),
        }
    }

    pub fn slot(&self) -> &PolicySlot {
        &self.slot
    }

    pub fn last_action(&self) -> [f64; ACTION_DIM] {
        self.inner.world.body.actuators
    }

    pub fn world(&self) -> &World {
        &self.inner.world
    }
}

impl SceneRuntime for Playground {
    fn handle(&mut self, env: &Envelope, out: &mut Outbox) -> Result<(), SceneError> {
        match env.kind.as_str() {
            types::POLICY_SWITCH => {
                let name = env
                    .payload_str("policy")
                    .ok_or_else(|| SceneError::InvalidPayload("policy.switch needs a string \"policy\"".into()))?;
                let active = self
                    .slot
                    .switch(name)
                    .map_err(|e| SceneError::rejected("unknown_policy", e.to_string()))?
                    .to_string();
                info!("playground policy -> {active}");
                emit_status(out, PLAYGROUND, &[("policy", Value::from(active))]);
                Ok(())
            }
            types::CONTROL_MOVE => {
                self.inner.control = ControlState::from_envelope(env, &SceneConfig::default())?;
                Ok(())
            }
            _ => Err(unsupported(PLAYGROUND, env)),
        }
    }

    fn sync_camera(&mut self, camera: &mut Camera) {
        *camera = Camera {
            center: [0.0, 0.45],
            scale: 160.0,
            follow: true,
        };
    }

    fn on_activate(&mut self, out: &mut Outbox) {
        emit_status(out, PLAYGROUND, &[("policy", Value::from(self.slot.active_name()))]);
    }
}

impl SimScene for Playground {
    fn name(&self) -> &'static str {
        PLAYGROUND
    }

    fn step(&mut self, out: &mut Outbox) {
        let action = self.slot.active().act(&self.inner.world.observe());
        self.inner.step(&action, out);
    }

    fn view(&self) -> SceneView {
        SceneView::of(PLAYGROUND, &self.inner.world, 0.0)
    }

    fn control(&self) -> &ControlState {
        &self.inner.control
    }
}

// RoboHeTu --------------------------------------------------------------------

/// Keyboard-steered locomotion over a strip with a bumpy stretch.
pub struct RoboHeTu {
    inner: Inference,
    cfg: SceneConfig,
    stander: LinearPolicy,
    walker: LinearPolicy,
}

/// The bumpy stretch of the strip, along x.
const TERRAIN_SPAN: (f64, f64) = (3.0, 15.0);

impl RoboHeTu {
    pub fn new(cfg: &SimConfig, seed: u64) -> Self {
        RoboHeTu {
            inner: Inference::new(inference_world(cfg, seed), &cfg.scenes),
            cfg: cfg.scenes.clone(),
            stander: stander_v0(),
            walker: walker_v1(),
        }
    }

    pub fn terrain_height(&self, x: f64) -> f64 {
        if x < TERRAIN_SPAN.0 || x > TERRAIN_SPAN.1 {
            return 0.0;
        }
        let phase = (x - TERRAIN_SPAN.0) / self.cfg.terrain_wavelength * std::f64::consts::TAU;
        self.cfg.terrain_amplitude * 0.5 * (1.0 - phase.cos())
    }

    pub fn world(&self) -> &World {
        &self.inner.world
    }
}

impl SceneRuntime for RoboHeTu {
    fn handle(&mut self, env: &Envelope, _out: &mut Outbox) -> Result<(), SceneError> {
        match env.kind.as_str() {
            types::CONTROL_MOVE => {
                self.inner.control = ControlState::from_envelope(env, &self.cfg)?;
                Ok(())
            }
            _ => Err(unsupported(ROBOHETU, env)),
        }
    }

    fn sync_camera(&mut self, camera: &mut Camera) {
        *camera = Camera {
            center: [0.0, 0.4],
            scale: 120.0,
            follow: true,
        };
    }
}

impl SimScene for RoboHeTu {
    fn name(&self) -> &'static str {
        ROBOHETU
    }

    fn step(&mut self, out: &mut Outbox) {
        let obs = self.inner.world.observe();
        let c = &self.inner.control;
        // Blend standing and walking gaits by the commanded fraction of the
        // run preset.
        let w = (c.speed / self.cfg.run_speed.max(1e-9)).clamp(0.0, 1.0);
        let a = self.stander.act(&obs);
        let b = self.walker.act(&obs);
        let mut action = [0.0; ACTION_DIM];
        for j in 0..ACTION_DIM {
            action[j] = (1.0 - w) * a[j] + w * b[j];
        }
        if self.inner.step(&action, out) {
            let x = self.inner.world.body.foot[0];
            self.inner.world.body.foot_z = self.terrain_height(x);
        }
        if self.inner.world.episode_step == 0 {
            self.inner.world.body.foot_z = 0.0;
        }
    }

    fn view(&self) -> SceneView {
        let mut v = SceneView::of(ROBOHETU, &self.inner.world, 0.0);
        let mut x = TERRAIN_SPAN.0 - 0.5;
        while x <= TERRAIN_SPAN.1 + 0.5 {
            v.terrain.push([x, self.terrain_height(x)]);
            x += 0.1;
        }
        v
    }

    fn control(&self) -> &ControlState {
        &self.inner.control
    }
}

// TinkerCoin ------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RunState {
    Idle,
    Training,
    /// Halt requested; waiting for the episode boundary.
    Halting,
}

/// Curriculum training from scratch with coins to collect.
pub struct TinkerCoin {
    trainer: Trainer,
    display: World,
    cfg: SceneConfig,
    state: RunState,
    control: ControlState,
    limiter: TelemetryLimiter,
    records: Vec<EpisodeRecord>,
    ticks: u64,
    last_checkpoint: Option<Vec<u8>>,
    checkpoint_path: Option<PathBuf>,
}

impl TinkerCoin {
    pub fn new(cfg: &SimConfig, seed: u64) -> Self {
        let mut tc = cfg.trainer.clone();
        tc.seed = tc.seed.wrapping_add(seed);
        TinkerCoin {
            trainer: Trainer::new(tc, cfg.world.clone(), cfg.curriculum.clone()),
            display: World::new(cfg.world.clone(), cfg.curriculum.clone(), seed ^ 0x7C0),
            cfg: cfg.scenes.clone(),
            state: RunState::Idle,
            control: ControlState::default(),
            limiter: TelemetryLimiter::new(cfg.scenes.telemetry_interval_ms),
            records: Vec::new(),
            ticks: 0,
            last_checkpoint: None,
            checkpoint_path: None,
        }
    }

    pub fn is_training(&self) -> bool {
        self.state != RunState::Idle
    }

    pub fn trainer(&self) -> &Trainer {
        &self.trainer
    }

    pub fn last_checkpoint(&self) -> Option<&[u8]> {
        self.last_checkpoint.as_deref()
    }

    pub fn checkpoint_path(&self) -> Option<&PathBuf> {
        self.checkpoint_path.as_ref()
    }

    fn sim_ms(&self) -> u64 {
        (self.ticks as f64 * self.display.cfg.dt * 1000.0) as u64
    }

    fn offer(&mut self, sample: TelemetrySample, out: &mut Outbox) {
        let now = self.sim_ms();
        if let Some(s) = self.limiter.offer(sample, now) {
            out.emit(s.stream, s.payload());
        }
    }

    fn finish_halt(&mut self, out: &mut Outbox) {
        self.state = RunState::Idle;
        let bytes = self.trainer.policy().to_checkpoint_bytes();
        let mut extra = vec![("training", Value::from(false))];
        if let Some(dir) = &self.cfg.checkpoint_dir {
            let path = dir.join(format!("tinkercoin-{}.gwpl", self.trainer.global_step()));
            match std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, &bytes)) {
                Ok(()) => {
                    info!("checkpoint written to {}", path.display());
                    extra.push(("checkpoint", Value::from(path.display().to_string())));
                    self.checkpoint_path = Some(path);
                }
                Err(e) => warn!("checkpoint write to {} failed: {e}", path.display()),
            }
        }
        self.last_checkpoint = Some(bytes);
        extra.push(("step", Value::from(self.trainer.global_step())));
        emit_status(out, TINKERCOIN, &extra);
    }
}

impl SceneRuntime for TinkerCoin {
    fn handle(&mut self, env: &Envelope, out: &mut Outbox) -> Result<(), SceneError> {
        match env.kind.as_str() {
            types::TRAINING_SET_FLAG => {
                if let Some(scene) = env.payload_str("scene") {
                    if !scene.eq_ignore_ascii_case(TINKERCOIN) {
                        return Err(SceneError::rejected(
                            "scene_mismatch",
                            format!("training runs in {TINKERCOIN}, not {scene}"),
                        ));
                    }
                }
                let on = env
                    .payload_bool("training")
                    .ok_or_else(|| SceneError::InvalidPayload("training.set_flag needs a boolean \"training\"".into()))?;
                match (on, self.state) {
                    (true, RunState::Training) => Err(SceneError::rejected(
                        "training_already_running",
                        "training is already running",
                    )),
                    (true, _) => {
                        self.trainer.resume();
                        self.state = RunState::Training;
                        info!("training started at step {}", self.trainer.global_step());
                        emit_status(out, TINKERCOIN, &[("training", Value::from(true))]);
                        Ok(())
                    }
                    (false, RunState::Training) => {
                        self.trainer.request_halt();
                        self.state = RunState::Halting;
                        if self.trainer.is_halted() {
                            self.finish_halt(out);
                        }
                        Ok(())
                    }
                    (false, _) => Ok(()),
                }
            }
            types::CONTROL_MOVE => {
                self.control = ControlState::from_envelope(env, &self.cfg)?;
                Ok(())
            }
            _ => Err(unsupported(TINKERCOIN, env)),
        }
    }

    fn sync_camera(&mut self, camera: &mut Camera) {
        *camera = Camera {
            center: [0.0, 0.45],
            scale: 100.0,
            follow: true,
        };
    }

    fn on_activate(&mut self, out: &mut Outbox) {
        emit_status(out, TINKERCOIN, &[("training", Value::from(false))]);
    }
}

impl SimScene for TinkerCoin {
    fn name(&self) -> &'static str {
        TINKERCOIN
    }

    fn step(&mut self, out: &mut Outbox) {
        self.ticks += 1;
        if self.state == RunState::Idle {
            // Show the current policy acting in a separate world so the
            // trainer's rollout is untouched.
            let lambda = lambda_at(self.trainer.global_step(), &self.display.sched);
            let action = self.trainer.policy().act(&self.display.observe());
            let res = self.display.step(&action, lambda);
            for p in &res.pickups {
                let s = TelemetrySample::new(types::TELEMETRY_COIN, self.trainer.global_step(), p.total as f64);
                self.offer(s, out);
            }
            if res.terminal.is_some() {
                self.display.reset();
            }
        } else {
            let records = self.trainer.advance(self.cfg.train_steps_per_tick);
            for r in records {
                let reward = TelemetrySample::new(types::TELEMETRY_REWARD, r.end_step, r.reward).with("episode", r.index);
                let episode = TelemetrySample::new(types::TELEMETRY_EPISODE, r.end_step, r.length as f64)
                    .with("episode", r.index)
                    .with("cause", cause_str(r.cause))
                    .with("coins", r.coins);
                self.offer(reward, out);
                self.offer(episode, out);
                self.records.push(r);
            }
            let step = self.trainer.global_step();
            let lambda = lambda_at(step, self.trainer.schedule());
            self.offer(TelemetrySample::new(types::TELEMETRY_CURRICULUM, step, lambda), out);
            if self.state == RunState::Halting && self.trainer.is_halted() {
                self.finish_halt(out);
            }
        }
        let now = self.sim_ms();
        for s in self.limiter.flush_due(now) {
            out.emit(s.stream, s.payload());
        }
    }

    fn view(&self) -> SceneView {
        if self.state == RunState::Idle {
            let lambda = lambda_at(self.trainer.global_step(), &self.display.sched);
            SceneView::of(TINKERCOIN, &self.display, lambda)
        } else {
            SceneView::of(TINKERCOIN, &self.trainer.world, self.trainer.lambda())
        }
    }

    fn control(&self) -> &ControlState {
        &self.control
    }

    fn records(&self) -> &[EpisodeRecord] {
        &self.records
    }
}

/// Registers Playground, RoboHeTu and TinkerCoin with their aliases.
pub fn register_builtin(
    director: &mut SceneDirector<dyn SimScene>,
    cfg: &SimConfig,
    seed: u64,
) -> Result<(), RegistryError> {
    let c = cfg.clone();
    director.register(
        PLAYGROUND,
        ["play"],
        Box::new(move || Box::new(Playground::new(&c, seed)) as Box<dyn SimScene>),
    )?;
    let c = cfg.clone();
    director.register(
        ROBOHETU,
        ["hetu", "robo"],
        Box::new(move || Box::new(RoboHeTu::new(&c, seed)) as Box<dyn SimScene>),
    )?;
    let c = cfg.clone();
    director.register(
        TINKERCOIN,
        ["tinker", "coin"],
        Box::new(move || Box::new(TinkerCoin::new(&c, seed)) as Box<dyn SimScene>),
    )?;
    Ok(())
}
