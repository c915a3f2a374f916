//! A short PPO training run on the 1-hop task, printing the metrics
//! series. With a from-scratch policy and sparse terminal rewards the
//! curve plateaus at reward 0 (well-formed but wrong answers); see the
//! behavior_cloning example for what the same network achieves given a
//! dense supervision signal.
//!
//!     cargo run --release --example train_onehop [updates]

use tokenagent::trainer::{metrics_to_csv, train, RunConfig, ScheduleConfig, TrainOptions};

fn main() -> anyhow::Result<()> {
    let updates: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(60);

    let config = RunConfig {
        schedule: ScheduleConfig {
            updates,
            ..ScheduleConfig::default()
        },
        seed: 1,
        ..RunConfig::default()
    };
    let result = train(
        &config,
        &TrainOptions {
            single_thread: true,
            verbose: true,
            ..TrainOptions::default()
        },
    )?;
    println!("\n{}", metrics_to_csv(&result.metrics));
    println!("final held-out EM: {:.3}", result.final_eval.mean_em);
    Ok(())
}
