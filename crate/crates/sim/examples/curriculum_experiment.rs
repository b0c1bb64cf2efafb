//! Paired curriculum / no-curriculum training runs.
//!
//! `cargo run --release --example curriculum_experiment -- [seeds] [max_steps] [compress]`
//!
//! Prints, per seed and arm, the global step at which the first 50-episode
//! window with ≥ 80 % full-horizon episodes closes, and whether the
//! 3-episode moving-average return went from negative to positive.

use gewu_sim::{milestone_step, reward_sign_change, CurriculumSchedule, Trainer, TrainerConfig, WorldConfig};

fn main() {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let seeds = args.first().copied().unwrap_or(5);
    let max_steps = args.get(1).copied().unwrap_or(1_000_000);
    let compress = args.get(2).copied().unwrap_or(50);
    let world = WorldConfig::default();
    let mut medians = [Vec::new(), Vec::new()];
    for seed in 0..seeds {
        for (arm, enabled) in [true, false].into_iter().enumerate() {
            let mut sched = CurriculumSchedule::default().compressed(compress);
            sched.enabled = enabled;
            let cfg = TrainerConfig { seed, ..TrainerConfig::default() };
            let mut trainer = Trainer::new(cfg, world.clone(), sched);
            let mut records = Vec::new();
            let mut hit = None;
            while hit.is_none() && trainer.global_step() < max_steps {
                records.extend(trainer.advance(10_000));
                hit = milestone_step(&records, world.horizon, 50, 0.8);
            }
            medians[arm].push(hit.unwrap_or(u64::MAX));
            println!(
                "seed {seed} curriculum={enabled} milestone={hit:?} episodes={} sign_change={}",
                records.len(),
                reward_sign_change(&records, 3)
            );
        }
    }
    for (arm, v) in medians.iter_mut().enumerate() {
        v.sort_unstable();
        println!("curriculum={} median={}", arm == 0, v[v.len() / 2]);
    }
}
