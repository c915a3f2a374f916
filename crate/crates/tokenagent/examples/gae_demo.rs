//! Masked generalized advantage estimation on a tiny hand-made
//! trajectory, with and without the advantage mask, next to the
//! Monte-Carlo reward-to-go oracle at λ=1.
//!
//!     cargo run --example gae_demo

use tokenagent::rl::masked_gae;

fn main() -> anyhow::Result<()> {
    // layout: [prompt, action, feedback, action] with the reward on the
    // last action token
    let rewards = [0.0, 0.0, 0.0, 1.0];
    let values = [0.9, 0.5, 0.3, 0.25];
    let mask = [0u8, 1, 0, 1];
    let (gamma, lambda) = (1.0, 0.95);

    let (adv_masked, ret_masked) = masked_gae(&rewards, &values, &mask, gamma, lambda, true)?;
    let (adv_all, ret_all) = masked_gae(&rewards, &values, &mask, gamma, lambda, false)?;

    println!("rewards        {rewards:?}");
    println!("values         {values:?}");
    println!("mask           {mask:?}");
    println!("\nadvantage mask on  (recursion over action positions only):");
    println!("  advantages {adv_masked:?}");
    println!("  returns    {ret_masked:?}");
    println!("\nadvantage mask off (recursion over every position):");
    println!("  advantages {adv_all:?}");
    println!("  returns    {ret_all:?}");

    // at λ=1 the masked estimate reduces to reward-to-go minus value
    let (adv_l1, _) = masked_gae(&rewards, &values, &mask, gamma, 1.0, true)?;
    let mc: Vec<f64> = mask
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            if m == 1 {
                rewards[i..].iter().sum::<f64>() - values[i]
            } else {
                0.0
            }
        })
        .collect();
    println!("\nλ=1 masked GAE      {adv_l1:?}");
    println!("Monte-Carlo oracle  {mc:?}");
    Ok(())
}
