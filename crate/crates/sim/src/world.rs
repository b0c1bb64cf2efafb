//! One robot in a coin field: physics tick, reward, coin pickups, episodes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::body::{BodyParams, RobotBody, TickInfo, ACTION_DIM};
use crate::curriculum::CurriculumSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    /// Per step, per m/s of forward torso velocity.
    pub forward_velocity: f64,
    pub upright_bonus: f64,
    /// Scale the upright bonus by `1 − (pitch / fall_threshold)²`.
    pub upright_shaped: bool,
    pub coin: f64,
    /// Penalty (positive number, subtracted) on falling.
    pub fall_penalty: f64,
    /// Coefficient on ‖action‖².
    pub effort: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            forward_velocity: 1.0,
            upright_bonus: 0.5,
            upright_shaped: true,
            coin: 10.0,
            fall_penalty: 700.0,
            effort: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoinConfig {
    pub pickup_radius: f64,
    /// Distance between consecutive coins along the initial heading.
    pub spacing: f64,
    pub count: usize,
    /// Lateral scatter of coin placement, m.
    pub scatter: f64,
    /// Collected coins reappear `count · spacing` further ahead.
    pub respawn: bool,
}

impl Default for CoinConfig {
    fn default() -> Self {
        CoinConfig {
            pickup_radius: 0.3,
            spacing: 1.0,
            count: 8,
            scatter: 0.1,
            respawn: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub body: BodyParams,
    pub reward: RewardWeights,
    pub coins: CoinConfig,
    pub dt: f64,
    pub horizon: u32,
    /// Uniform half-width of the initial lean, rad.
    pub initial_lean_noise: f64,
    /// Uniform half-width of the initial lean rate, rad/s.
    pub initial_rate_noise: f64,
    /// Mean rate of random pushes on the torso, per second.
    pub push_rate: f64,
    /// Push magnitude range as a lean-rate change, rad/s.
    pub push_min: f64,
    pub push_max: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            body: BodyParams::default(),
            reward: RewardWeights::default(),
            coins: CoinConfig::default(),
            dt: 1.0 / 60.0,
            horizon: 1000,
            initial_lean_noise: 0.2,
            initial_rate_noise: 0.3,
            push_rate: 0.5,
            push_min: 0.3,
            push_max: 0.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coin {
    pub pos: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoinPickup {
    pub pos: [f64; 2],
    pub total: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminalCause {
    Fell,
    Horizon,
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub index: u64,
    pub reward: f64,
    pub length: u32,
    pub coins: u32,
    pub cause: TerminalCause,
    /// Global training step at which the episode ended.
    pub end_step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub tick: TickInfo,
    pub pickups: Vec<CoinPickup>,
    pub terminal: Option<TerminalCause>,
}

pub const OBS_DIM: usize = 6;

/// Policy observation: normalized lean, lean rate, stance phase, forward
/// velocity, swing flag, bias.
pub fn observe(body: &RobotBody, params: &BodyParams) -> [f64; OBS_DIM] {
    let phase = (body.ticks_since_step as f64 / params.min_step_ticks.max(1) as f64).min(2.0);
    [
        body.lean / 0.3,
        body.lean_rate / 2.0,
        phase,
        body.forward_velocity(params),
        if body.swing.is_some() { 1.0 } else { 0.0 },
        1.0,
    ]
}

#[derive(Debug, Clone)]
pub struct World {
    pub cfg: WorldConfig,
    pub sched: CurriculumSchedule,
    pub body: RobotBody,
    pub coins: Vec<Coin>,
    pub episode_step: u32,
    pub episode_reward: f64,
    pub coins_collected: u32,
    next_coin_slot: usize,
    rng: ChaCha8Rng,
}

impl World {
    pub fn new(cfg: WorldConfig, sched: CurriculumSchedule, seed: u64) -> Self {
        let body = RobotBody::standing(&cfg.body, [0.0, 0.0], 0.0);
        let mut world = World {
            cfg,
            sched,
            body,
            coins: Vec::new(),
            episode_step: 0,
            episode_reward: 0.0,
            coins_collected: 0,
            next_coin_slot: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        world.reset();
        world
    }

    /// A world with no coins and a still, upright robot.
    pub fn empty(cfg: WorldConfig, sched: CurriculumSchedule) -> Self {
        let mut world = World::new(cfg, sched, 0);
        world.coins.clear();
        world.body.lean = 0.0;
        world.body.lean_rate = 0.0;
        world
    }

    pub fn reset(&mut self) {
        let p = &self.cfg.body;
        let mut body = RobotBody::standing(p, [0.0, 0.0], 0.0);
        let ln = self.cfg.initial_lean_noise;
        let rn = self.cfg.initial_rate_noise;
        if ln > 0.0 {
            body.lean = self.rng.gen_range(-ln..=ln);
        }
        if rn > 0.0 {
            body.lean_rate = self.rng.gen_range(-rn..=rn);
        }
        self.body = body;
        self.episode_step = 0;
        self.episode_reward = 0.0;
        self.coins_collected = 0;
        self.coins.clear();
        self.next_coin_slot = 0;
        for _ in 0..self.cfg.coins.count {
            self.spawn_coin();
        }
    }

    fn spawn_coin(&mut self) {
        self.next_coin_slot += 1;
        let c = &self.cfg.coins;
        let along = self.next_coin_slot as f64 * c.spacing;
        let lateral = if c.scatter > 0.0 {
            self.rng.gen_range(-c.scatter..=c.scatter)
        } else {
            0.0
        };
        self.coins.push(Coin {
            pos: [along, lateral],
        });
    }

    pub fn place_coin(&mut self, pos: [f64; 2]) {
        self.coins.push(Coin { pos });
    }

    pub fn observe(&self) -> [f64; OBS_DIM] {
        observe(&self.body, &self.cfg.body)
    }

    /// Removes every coin within the pickup radius of the torso (closed ball,
    /// planar distance).
    pub fn collect_coins(&mut self) -> Vec<CoinPickup> {
        let torso = self.body.torso(&self.cfg.body);
        let r = self.cfg.coins.pickup_radius;
        let mut pickups = Vec::new();
        let mut i = 0;
        while i < self.coins.len() {
            let c = self.coins[i].pos;
            let d2 = (c[0] - torso[0]).powi(2) + (c[1] - torso[1]).powi(2);
            if d2 <= r * r {
                self.coins.remove(i);
                self.coins_collected += 1;
                pickups.push(CoinPickup {
                    pos: c,
                    total: self.coins_collected,
                });
            } else {
                i += 1;
            }
        }
        if self.cfg.coins.respawn {
            for _ in 0..pickups.len() {
                self.spawn_coin();
            }
        }
        pickups
    }

    /// One fixed-timestep update under `action` with assist fraction `lambda`.
    pub fn step(&mut self, action: &[f64; ACTION_DIM], lambda: f64) -> StepOutcome {
        let dt = self.cfg.dt;
        if self.cfg.push_rate > 0.0 && self.rng.gen::<f64>() < self.cfg.push_rate * dt {
            let (lo, hi) = (self.cfg.push_min, self.cfg.push_max.max(self.cfg.push_min));
            let magnitude = self.rng.gen_range(lo..=hi);
            let sign = if self.rng.gen::<bool>() { 1.0 } else { -1.0 };
            self.body.lean_rate += sign * magnitude;
        }
        let tick = self.body.tick(&self.cfg.body, &self.sched, lambda, action, dt);
        self.episode_step += 1;
        let w = self.cfg.reward.clone();
        let mut reward = w.forward_velocity * tick.forward_velocity - w.effort * tick.effort;
        let pickups = if self.body.upright { self.collect_coins() } else { Vec::new() };
        reward += w.coin * pickups.len() as f64;
        let terminal = if !self.body.upright {
            reward -= w.fall_penalty;
            Some(TerminalCause::Fell)
        } else {
            let scale = if w.upright_shaped {
                1.0 - (self.body.pitch() / self.cfg.body.fall_threshold).powi(2)
            } else {
                1.0
            };
            reward += w.upright_bonus * scale;
            (self.episode_step >= self.cfg.horizon).then_some(TerminalCause::Horizon)
        };
        self.episode_reward += reward;
        StepOutcome {
            reward,
            tick,
            pickups,
            terminal,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coin_world() -> World {
        let mut cfg = WorldConfig::default();
        cfg.coins.count = 0;
        cfg.coins.respawn = false;
        cfg.initial_lean_noise = 0.0;
        cfg.initial_rate_noise = 0.0;
        cfg.push_rate = 0.0;
        World::new(cfg, CurriculumSchedule::default(), 1)
    }

    #[test]
    fn coin_exactly_on_radius_is_collected() {
        let mut w = coin_world();
        let torso = w.body.torso(&w.cfg.body);
        // 0.3 is not exact in binary; 0.25 and 0.5 are.
        w.cfg.coins.pickup_radius = 0.25;
        w.place_coin([torso[0] + 0.25, torso[1]]);
        w.place_coin([torso[0] + 0.5, torso[1]]);
        let picks = w.collect_coins();
        assert_eq!(picks.len(), 1);
        assert_eq!(w.coins.len(), 1);
    }

    #[test]
    fn path_through_three_coins() {
        let mut w = coin_world();
        for x in [0.5, 1.0, 1.5] {
            w.place_coin([x, 0.0]);
        }
        let mut total = 0;
        // Drag the stance foot along the path.
        for i in 0..40 {
            w.body.foot = [i as f64 * 0.05, 0.0];
            total += w.collect_coins().len();
        }
        assert_eq!(total, 3);
        assert_eq!(w.coins_collected, 3);
        assert!(w.collect_coins().is_empty());
    }

    #[test]
    fn fall_terminates_with_penalty() {
        let mut w = coin_world();
        w.body.lean = 0.55;
        w.body.lean_rate = 3.0;
        let mut last = None;
        for _ in 0..100 {
            let out = w.step(&[0.0; ACTION_DIM], 0.0);
            if out.terminal.is_some() {
                last = Some(out);
                break;
            }
        }
        let out = last.expect("fell");
        assert_eq!(out.terminal, Some(TerminalCause::Fell));
        assert!(out.reward < -90.0);
    }

    #[test]
    fn horizon_terminates() {
        let mut w = coin_world();
        w.cfg.horizon = 10;
        let causes: Vec<_> = (0..10).map(|_| w.step(&[0.0; ACTION_DIM], 1.0).terminal).collect();
        assert!(causes[..9].iter().all(Option::is_none));
        assert_eq!(causes[9], Some(TerminalCause::Horizon));
    }
}
