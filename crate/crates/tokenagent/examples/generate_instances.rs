//! Generate a handful of multi-hop retrieval instances and dump them as
//! JSONL (question, gold answer, gold chain, full fact table, seed).
//!
//!     cargo run --example generate_instances [hops] [count]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tokenagent::hopqa::{generate_instance, instances_to_jsonl, HopConfig, TaskVocab};
use tokenagent::rollout::derive_seed;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let hops: u32 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2);
    let count: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);

    let cfg = HopConfig {
        hops,
        ..HopConfig::default()
    };
    let task = TaskVocab::new(cfg.n_entities, cfg.n_relations);
    let instances: Vec<_> = (0..count)
        .map(|i| {
            let seed = derive_seed(42, i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            generate_instance(&mut rng, &task, &cfg, seed)
        })
        .collect::<Result<_, _>>()?;

    print!("{}", instances_to_jsonl(&instances, task.vocab()));
    Ok(())
}
