//! The edge main loop body: inbound commands in, fixed-rate physics, paced
//! frames and outbound envelopes out. Time is supplied by the caller so the
//! same code runs on the wall clock and on a virtual one.

use gewu_director::{DirectorConfig, RouteOutcome, SceneDirector};
use gewu_protocol::{error_reply, Envelope, IdGenerator};
use gewu_sim::{register_builtin, SimScene};
use gewu_stream::{encode_frame, render, Encoding, Pacer};
use gewu_transport::Polled;
use log::{debug, info};

use crate::config::EdgeConfig;
use crate::EdgeError;

/// Physics tick length.
pub const TICK_MS: f64 = 1000.0 / 60.0;

pub const SOURCE: &str = "edge";

#[derive(Debug, Clone)]
pub struct EdgeOptions {
    pub seed: u64,
    /// Curriculum breakpoint divisor.
    pub compress: Option<u64>,
    pub default_scene: Option<String>,
    /// Overrides `stream.fps`.
    pub fps: Option<u32>,
    /// Render and pace frames at all.
    pub stream: bool,
}

impl Default for EdgeOptions {
    fn default() -> Self {
        EdgeOptions {
            seed: 0,
            compress: None,
            default_scene: None,
            fps: None,
            stream: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AppStats {
    pub ticks: u64,
    pub routed: u64,
    pub refused: u64,
    /// Inbound bytes that did not decode.
    pub rejected: u64,
    pub frames_sent: u64,
}

/// What one [`EdgeApp::advance_to`] call produced.
#[derive(Debug, Default)]
pub struct Tick {
    pub envelopes: Vec<Envelope>,
    /// An encoded GWFR frame and its seq.
    pub frame: Option<(u32, Vec<u8>)>,
}

struct Streamer {
    width: u16,
    height: u16,
    encoding: Encoding,
    pacer: Pacer<()>,
    seq: u32,
}

pub struct EdgeApp {
    director: SceneDirector<dyn SimScene>,
    streamer: Option<Streamer>,
    start_ms: u64,
    ticks: u64,
    stats: AppStats,
}

impl EdgeApp {
    /// Registers the built-in scenes and boots. With no default scene
    /// nothing is Active until the first `scene.load`.
    pub fn new(cfg: &EdgeConfig, opts: &EdgeOptions, start_ms: u64) -> Result<Self, EdgeError> {
        let mut sim = cfg.sim();
        if let Some(f) = opts.compress {
            if f == 0 {
                return Err(EdgeError::BadConfig("--compress must be positive".into()));
            }
            sim = sim.compressed(f);
        }
        let ids = IdGenerator::seeded(SOURCE, opts.seed);
        let mut director: SceneDirector<dyn SimScene> = SceneDirector::new(DirectorConfig::default(), ids);
        register_builtin(&mut director, &sim, opts.seed).map_err(|e| EdgeError::Scene(e.to_string()))?;
        if let Some(name) = &opts.default_scene {
            director
                .bootstrap(name, start_ms)
                .map_err(|e| EdgeError::BadConfig(format!("--default-scene: {e}")))?;
        }
        let streamer = if opts.stream {
            let fps = opts.fps.unwrap_or(cfg.stream.fps);
            if fps == 0 {
                return Err(EdgeError::BadConfig("--fps must be positive".into()));
            }
            Some(Streamer {
                width: cfg.stream.width,
                height: cfg.stream.height,
                encoding: cfg.stream.encoding()?,
                pacer: Pacer::new(fps),
                seq: 0,
            })
        } else {
            None
        };
        info!(
            "edge booted: scenes registered, active={:?}",
            director.active_name()
        );
        Ok(EdgeApp {
            director,
            streamer,
            start_ms,
            ticks: 0,
            stats: AppStats::default(),
        })
    }

    pub fn director(&self) -> &SceneDirector<dyn SimScene> {
        &self.director
    }

    pub fn director_mut(&mut self) -> &mut SceneDirector<dyn SimScene> {
        &mut self.director
    }

    pub fn stats(&self) -> AppStats {
        self.stats
    }

    pub fn active_name(&self) -> Option<&str> {
        self.director.active_name()
    }

    /// Routes one polled batch. Undecodable input is answered with
    /// `protocol.error`; it is data, not a fault.
    pub fn ingest(&mut self, polled: Polled, now_ms: u64) -> Vec<RouteOutcome> {
        for r in polled.rejected {
            self.stats.rejected += 1;
            let out = self.director.outbox_mut();
            let id = out.next_id();
            let reply = error_reply(id, SOURCE, now_ms, &r.error, r.ref_id.as_deref());
            out.push(reply);
        }
        polled.envelopes.into_iter().map(|e| self.route(e, now_ms)).collect()
    }

    pub fn route(&mut self, env: Envelope, now_ms: u64) -> RouteOutcome {
        debug!("inbound {} {}", env.kind, env.id);
        let outcome = self.director.route(env, now_ms);
        match outcome {
            RouteOutcome::Error(_) => self.stats.refused += 1,
            _ => self.stats.routed += 1,
        }
        outcome
    }

    /// Runs every physics tick due by `now_ms`, then renders a frame if the
    /// pacer allows and the media path is `media_ready`.
    pub fn advance_to(&mut self, now_ms: u64, media_ready: bool) -> Tick {
        loop {
            let t = self.start_ms + ((self.ticks + 1) as f64 * TICK_MS) as u64;
            if t > now_ms {
                break;
            }
            self.ticks += 1;
            self.director.tick(t);
            let (scene, out) = self.director.active_and_outbox();
            if let Some(scene) = scene {
                scene.step(out);
            }
        }
        self.director.tick(now_ms);
        self.stats.ticks = self.ticks;
        let frame = self.frame(now_ms, media_ready);
        Tick {
            envelopes: self.director.drain_outbox(),
            frame,
        }
    }

    fn frame(&mut self, now_ms: u64, ready: bool) -> Option<(u32, Vec<u8>)> {
        let s = self.streamer.as_mut()?;
        if !ready || !s.pacer.budget_open(now_ms) {
            return None;
        }
        s.seq = s.seq.wrapping_add(1);
        s.pacer.offer(s.seq, ());
        let (seq, ()) = s.pacer.poll(now_ms, true)?;
        let view = self.director.active().map(|a| a.view());
        let raster = render(view.as_ref(), self.director.camera(), s.width, s.height);
        self.stats.frames_sent += 1;
        Some((seq, encode_frame(&raster, seq, now_ms, s.encoding)))
    }
}
