//! Trains a policy and writes it as a GWPL checkpoint.
//!
//! `cargo run --release --example train_policy -- <out.gwpl> [steps] [seed] [forward_weight]`

use gewu_sim::{CurriculumSchedule, Trainer, TrainerConfig, WorldConfig};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = args.first().expect("output path");
    let steps: u64 = args.get(1).map_or(200_000, |s| s.parse().unwrap());
    let seed: u64 = args.get(2).map_or(0, |s| s.parse().unwrap());
    let mut world = WorldConfig::default();
    if let Some(w) = args.get(3) {
        world.reward.forward_velocity = w.parse().unwrap();
    }
    let cfg = TrainerConfig { seed, ..TrainerConfig::default() };
    let mut trainer = Trainer::new(cfg, world, CurriculumSchedule::default().compressed(50));
    let records = trainer.advance(steps);
    let tail = &records[records.len().saturating_sub(20)..];
    let full = tail.iter().filter(|r| r.length == 1000).count();
    println!(
        "episodes={} last20: full={full} mean_reward={:.1}",
        records.len(),
        tail.iter().map(|r| r.reward).sum::<f64>() / tail.len() as f64
    );
    println!("{:?}", trainer.policy().params.iter().map(|p| *p as f32).collect::<Vec<_>>());
    std::fs::write(out, trainer.policy().to_checkpoint_bytes()).expect("write checkpoint");
}
