//! Walk a 2-hop instance with the scripted gold-chain agent and print the
//! resulting trajectory: per-token symbols, action mask, rewards, and the
//! JSONL dump line. The episode always scores reward 1.0.
//!
//!     cargo run --example oracle_rollout

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tokenagent::hopqa::{generate_instance, oracle_turns, search_registry, HopConfig, TaskVocab};
use tokenagent::rollout::{rollout_episode, ScriptedActor};
use tokenagent::tool_env::{Limits, ProcessRewardConfig, ToolEnv};

fn main() -> anyhow::Result<()> {
    let cfg = HopConfig {
        hops: 2,
        ..HopConfig::default()
    };
    let task = TaskVocab::new(cfg.n_entities, cfg.n_relations);
    let registry = search_registry();
    let seed = 7;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instance = generate_instance(&mut rng, &task, &cfg, seed)?;

    println!(
        "question: {:?}   gold: {}",
        task.vocab().decode(&instance.question_tokens),
        task.vocab().symbol(instance.gold_answer)
    );

    let mut env = ToolEnv::new(
        &instance,
        &task,
        &registry,
        Limits::default(),
        ProcessRewardConfig::default(),
        cfg.top_k,
        0,
    );
    let mut actor = ScriptedActor::from_turns(&oracle_turns(&instance));
    let rec = rollout_episode(&mut actor, &mut env, instance.seed, 0)?;

    println!("\n tok  mask  reward  symbol");
    for (i, t) in rec.trajectory.tokens.iter().enumerate() {
        println!(
            "{i:>4}  {:>4}  {:>6.2}  {}",
            rec.trajectory.mask[i],
            rec.trajectory.rewards[i],
            task.vocab().symbol(*t)
        );
    }
    println!(
        "\nreason: {}   episode reward: {}",
        rec.trajectory.reason.as_str(),
        rec.episode_reward
    );
    println!("\ndump line:\n{}", rec.trajectory.dump_line(task.vocab()));
    Ok(())
}
