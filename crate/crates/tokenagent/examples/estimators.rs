//! The scalar advantage estimators on a single rollout group, worked by
//! hand: GRPO standardization, RLOO leave-one-out baselines, and the
//! discounted REINFORCE++ variants.
//!
//!     cargo run --example estimators

use tokenagent::rl::{grpo_advantages, reinforce_pp_advantages, rloo_advantages};

fn main() -> anyhow::Result<()> {
    let rewards = [1.0, 0.0, 0.0, 1.0];
    println!("group rewards: {rewards:?}");
    println!("grpo (standardized): {:?}", grpo_advantages(&rewards, 1e-8)?);
    println!("rloo (leave-one-out): {:?}", rloo_advantages(&rewards)?);
    // rloo: each baseline is the mean of the other three, so +-2/3 exactly

    // reinforce++ distributes discounted reward-to-go over a trajectory's
    // action tokens; the group baseline subtracts the group's mean total
    let traj_rewards = vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]];
    let masks = vec![vec![1u8, 1, 1], vec![1u8, 1, 1]];
    let group_ids = vec![0, 0];
    let plain = reinforce_pp_advantages(
        &traj_rewards,
        &masks,
        &group_ids,
        1.0,
        false,
        true,
        1e-8,
        false,
    )?;
    let baselined = reinforce_pp_advantages(
        &traj_rewards,
        &masks,
        &group_ids,
        1.0,
        true,
        true,
        1e-8,
        false,
    )?;
    println!("\ntrajectory rewards: {traj_rewards:?}");
    println!("reinforce++ reward-to-go:  {plain:?}");
    println!("reinforce++ group-baseline: {baselined:?}");
    Ok(())
}
