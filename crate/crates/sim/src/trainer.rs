//! Desk-scale policy optimization over the toy biped.
//!
//! Clipped-surrogate policy gradient: a linear Gaussian policy over the
//! pre-tanh action (the deterministic policy is [`LinearPolicy`]), a linear
//! value baseline fit by ridge regression, and generalized advantage
//! estimation. The global step counter counts environment steps and drives
//! the curriculum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::body::ACTION_DIM;
use crate::curriculum::{lambda_at, CurriculumSchedule};
use crate::policy::{LinearPolicy, PARAM_COUNT};
use crate::world::{EpisodeRecord, TerminalCause, World, WorldConfig, OBS_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerConfig {
    pub seed: u64,
    /// Environment steps per policy update.
    pub batch_steps: usize,
    /// Gradient passes over each batch.
    pub epochs: usize,
    pub learning_rate: f64,
    /// Likelihood-ratio clip.
    pub clip: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub init_log_std: f64,
    pub min_log_std: f64,
    /// Bonus on log σ per update, nats.
    pub entropy: f64,
    /// Value-fit ridge strength, per 100 samples.
    pub critic_ridge: f64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            seed: 42,
            batch_steps: 1024,
            epochs: 10,
            learning_rate: 0.02,
            clip: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            init_log_std: -1.0,
            min_log_std: -2.5,
            entropy: 0.0,
            critic_ridge: 1.0,
        }
    }
}

const FEAT_DIM: usize = OBS_DIM + 5;

fn features(obs: &[f64; OBS_DIM], lambda: f64, time_frac: f64) -> [f64; FEAT_DIM] {
    let mut f = [0.0; FEAT_DIM];
    f[..OBS_DIM].copy_from_slice(obs);
    f[OBS_DIM] = obs[0] * obs[0];
    f[OBS_DIM + 1] = obs[1] * obs[1];
    f[OBS_DIM + 2] = obs[0] * obs[1];
    f[OBS_DIM + 3] = lambda;
    f[OBS_DIM + 4] = time_frac;
    f
}

struct Sample {
    obs: [f64; OBS_DIM],
    z: [f64; ACTION_DIM],
    logp: f64,
    reward: f64,
    done: bool,
    feat: [f64; FEAT_DIM],
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn ascend(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] += lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

pub struct Trainer {
    cfg: TrainerConfig,
    pub world: World,
    policy: LinearPolicy,
    log_std: [f64; ACTION_DIM],
    value: [f64; FEAT_DIM],
    adam: Adam,
    rng: ChaCha8Rng,
    buffer: Vec<Sample>,
    global_step: u64,
    episode_index: u64,
    last_lambda: f64,
    halt_requested: bool,
    halted: bool,
}

fn log_prob(z: &[f64; ACTION_DIM], mu: &[f64; ACTION_DIM], log_std: &[f64; ACTION_DIM]) -> f64 {
    let mut lp = 0.0;
    for j in 0..ACTION_DIM {
        let s = log_std[j].exp();
        let d = (z[j] - mu[j]) / s;
        lp += -0.5 * d * d - log_std[j];
    }
    lp
}

fn mean_action(params: &[f64], obs: &[f64; OBS_DIM]) -> [f64; ACTION_DIM] {
    let mut mu = [0.0; ACTION_DIM];
    for (j, m) in mu.iter_mut().enumerate() {
        *m = params[j * OBS_DIM..(j + 1) * OBS_DIM]
            .iter()
            .zip(obs)
            .map(|(w, o)| w * o)
            .sum();
    }
    mu
}

impl Trainer {
    pub fn new(cfg: TrainerConfig, world_cfg: WorldConfig, sched: CurriculumSchedule) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let world = World::new(world_cfg, sched, rng.gen());
        let log_std = [cfg.init_log_std; ACTION_DIM];
        Trainer {
            world,
            policy: LinearPolicy::default(),
            log_std,
            value: [0.0; FEAT_DIM],
            adam: Adam::new(PARAM_COUNT + ACTION_DIM),
            rng,
            buffer: Vec::new(),
            global_step: 0,
            episode_index: 0,
            last_lambda: 1.0,
            halt_requested: false,
            halted: false,
            cfg,
        }
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    pub fn policy(&self) -> &LinearPolicy {
        &self.policy
    }

    pub fn log_std(&self) -> [f64; ACTION_DIM] {
        self.log_std
    }

    pub fn episodes(&self) -> u64 {
        self.episode_index
    }

    /// λ used for the most recent step.
    pub fn lambda(&self) -> f64 {
        self.last_lambda
    }

    pub fn schedule(&self) -> &CurriculumSchedule {
        &self.world.sched
    }

    /// Stops at the next episode boundary.
    pub fn request_halt(&mut self) {
        self.halt_requested = true;
        if self.world.episode_step == 0 {
            self.halted = true;
        }
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    pub fn resume(&mut self) {
        self.halt_requested = false;
        self.halted = false;
    }

    /// Runs up to `budget` environment steps and returns the episodes that
    /// ended. Returns early once halted.
    pub fn advance(&mut self, budget: u64) -> Vec<EpisodeRecord> {
        let mut finished = Vec::new();
        for _ in 0..budget {
            if self.halted {
                break;
            }
            let lambda = lambda_at(self.global_step, &self.world.sched);
            self.last_lambda = lambda;
            let obs = self.world.observe();
            let time_frac = self.world.episode_step as f64 / self.world.cfg.horizon as f64;
            let mu = mean_action(&self.policy.params, &obs);
            let mut z = [0.0; ACTION_DIM];
            for j in 0..ACTION_DIM {
                let eps: f64 = self.rng.sample(StandardNormal);
                z[j] = mu[j] + self.log_std[j].exp() * eps;
            }
            let action = z.map(f64::tanh);
            let out = self.world.step(&action, lambda);
            self.global_step += 1;
            self.buffer.push(Sample {
                obs,
                z,
                logp: log_prob(&z, &mu, &self.log_std),
                reward: out.reward,
                done: out.terminal.is_some(),
                feat: features(&obs, lambda, time_frac),
            });
            if let Some(cause) = out.terminal {
                finished.push(self.end_episode(cause));
            }
            if self.buffer.len() >= self.cfg.batch_steps {
                self.update();
            }
        }
        finished
    }

    fn end_episode(&mut self, cause: TerminalCause) -> EpisodeRecord {
        let record = EpisodeRecord {
            index: self.episode_index,
            reward: self.world.episode_reward,
            length: self.world.episode_step,
            coins: self.world.coins_collected,
            cause,
            end_step: self.global_step,
        };
        self.episode_index += 1;
        self.world.reset();
        if self.halt_requested {
            self.halted = true;
        }
        record
    }

    fn value_of(&self, feat: &[f64; FEAT_DIM]) -> f64 {
        self.value.iter().zip(feat).map(|(w, f)| w * f).sum()
    }

    #[allow(clippy::needless_range_loop)]
    fn update(&mut self) {
        let n = self.buffer.len();
        // Bootstrap from the current state when the batch ends mid-episode.
        let obs = self.world.observe();
        let time_frac = self.world.episode_step as f64 / self.world.cfg.horizon as f64;
        let tail_value = self.value_of(&features(&obs, self.last_lambda, time_frac));

        let values: Vec<f64> = self.buffer.iter().map(|s| self.value_of(&s.feat)).collect();
        let mut adv = vec![0.0; n];
        let mut gae = 0.0;
        for i in (0..n).rev() {
            let s = &self.buffer[i];
            let next_value = if s.done {
                0.0
            } else if i + 1 < n {
                values[i + 1]
            } else {
                tail_value
            };
            let delta = s.reward + self.cfg.gamma * next_value - values[i];
            let carry = if s.done { 0.0 } else { gae };
            gae = delta + self.cfg.gamma * self.cfg.gae_lambda * carry;
            adv[i] = gae;
        }
        let returns: Vec<f64> = adv.iter().zip(&values).map(|(a, v)| a + v).collect();

        // Critic: ridge regression toward the previous weights.
        let mut ata = [[0.0; FEAT_DIM]; FEAT_DIM];
        let mut atb = [0.0; FEAT_DIM];
        for (s, r) in self.buffer.iter().zip(&returns) {
            for a in 0..FEAT_DIM {
                atb[a] += s.feat[a] * r;
                for b in 0..FEAT_DIM {
                    ata[a][b] += s.feat[a] * s.feat[b];
                }
            }
        }
        let ridge = self.cfg.critic_ridge * n as f64 / 100.0;
        for a in 0..FEAT_DIM {
            ata[a][a] += ridge;
            atb[a] += ridge * self.value[a];
        }
        if let Some(w) = solve(ata, atb) {
            self.value = w;
        }

        let mean = adv.iter().sum::<f64>() / n as f64;
        let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64).sqrt().max(1e-8);
        for a in adv.iter_mut() {
            *a = (*a - mean) / std;
        }

        let mut params: Vec<f64> = self.policy.params.clone();
        params.extend_from_slice(&self.log_std);
        for _ in 0..self.cfg.epochs {
            let mut grad = vec![0.0; PARAM_COUNT + ACTION_DIM];
            let log_std: [f64; ACTION_DIM] = params[PARAM_COUNT..].try_into().unwrap();
            for (s, a) in self.buffer.iter().zip(&adv) {
                let mu = mean_action(&params[..PARAM_COUNT], &s.obs);
                let logp = log_prob(&s.z, &mu, &log_std);
                let ratio = (logp - s.logp).exp();
                let clipped = (a > &0.0 && ratio > 1.0 + self.cfg.clip)
                    || (a < &0.0 && ratio < 1.0 - self.cfg.clip);
                if clipped {
                    continue;
                }
                let w = ratio * a;
                for j in 0..ACTION_DIM {
                    let var = (2.0 * log_std[j]).exp();
                    let d = s.z[j] - mu[j];
                    let g_mu = d / var;
                    for k in 0..OBS_DIM {
                        grad[j * OBS_DIM + k] += w * g_mu * s.obs[k];
                    }
                    grad[PARAM_COUNT + j] += w * (d * d / var - 1.0);
                }
            }
            for (j, g) in grad.iter_mut().enumerate() {
                *g /= n as f64;
                if j >= PARAM_COUNT {
                    *g += self.cfg.entropy;
                }
            }
            self.adam.ascend(&mut params, &grad, self.cfg.learning_rate);
            for ls in params[PARAM_COUNT..].iter_mut() {
                *ls = ls.clamp(self.cfg.min_log_std, 1.0);
            }
        }
        self.policy.params.copy_from_slice(&params[..PARAM_COUNT]);
        self.log_std.copy_from_slice(&params[PARAM_COUNT..]);
        self.buffer.clear();
    }
}

/// Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn solve<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for col in 0..N {
        let pivot = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            for k in col..N {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let s: f64 = (row + 1..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Global step at which the first `window`-episode window reaches
/// `fraction` full-horizon episodes.
pub fn milestone_step(records: &[EpisodeRecord], horizon: u32, window: usize, fraction: f64) -> Option<u64> {
    if window == 0 || records.len() < window {
        return None;
    }
    let need = (fraction * window as f64).ceil() as usize;
    let full = |r: &EpisodeRecord| r.length == horizon;
    let mut count = records[..window].iter().filter(|r| full(r)).count();
    if count >= need {
        return Some(records[window - 1].end_step);
    }
    for i in window..records.len() {
        count += usize::from(full(&records[i]));
        count -= usize::from(full(&records[i - window]));
        if count >= need {
            return Some(records[i].end_step);
        }
    }
    None
}

/// Whether the `window`-episode moving average of episode return goes
/// negative and later positive.
pub fn reward_sign_change(records: &[EpisodeRecord], window: usize) -> bool {
    if window == 0 {
        return false;
    }
    let ma: Vec<f64> = records
        .windows(window)
        .map(|w| w.iter().map(|r| r.reward).sum::<f64>() / window as f64)
        .collect();
    ma.iter()
        .position(|m| *m < 0.0)
        .is_some_and(|i| ma[i..].iter().any(|m| *m > 0.0))
}
