//! A small run of the mask-ablation arms (PPO: masks on / advantage mask
//! off / both off; GRPO: loss mask on / off) and the resulting CSV table
//! with per-seed rows and per-arm medians.
//!
//!     cargo run --release --example mask_ablation

use tokenagent::hopqa::HopConfig;
use tokenagent::rl::{Algorithm, RlConfig};
use tokenagent::trainer::{run_ablation, EnvConfig, RunConfig, ScheduleConfig, TrainOptions};

fn main() -> anyhow::Result<()> {
    for algorithm in [Algorithm::Ppo, Algorithm::Grpo] {
        let config = RunConfig {
            env: EnvConfig {
                hop: HopConfig {
                    hops: 2,
                    ..HopConfig::default()
                },
                ..EnvConfig::default()
            },
            rl: RlConfig {
                algorithm,
                ..RlConfig::default()
            },
            schedule: ScheduleConfig {
                updates: 10,
                episodes_per_update: 16,
                eval_interval: 10,
                eval_set_size: 16,
            },
            seeds: vec![1, 2, 3],
            ..RunConfig::default()
        };
        let report = run_ablation(&config, &TrainOptions::default())?;
        println!("{}", report.to_csv());
    }
    Ok(())
}
