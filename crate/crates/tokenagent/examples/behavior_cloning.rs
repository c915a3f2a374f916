//! Capacity check for the tiny policy: clone the scripted gold-chain
//! agent with plain supervised NLL on oracle trajectories, then evaluate
//! greedily on held-out instances. EM approaches 1.0 within a few hundred
//! steps, which isolates the RL difficulty on this task as exploration
//! (discovering well-formed tool calls from sparse terminal rewards), not
//! network capacity.
//!
//!     cargo run --release --example behavior_cloning [steps] [lr] [hidden] [embed]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tokenagent::hopqa::{generate_instance, oracle_turns, search_registry, HopConfig, TaskVocab, PAD};
use tokenagent::policy::{
    apply_gradient, backward, context_window, init_params, BackwardSample, Dims,
};
use tokenagent::rollout::{derive_seed, rollout_episode, ScriptedActor};
use tokenagent::tool_env::{Limits, ProcessRewardConfig, ToolEnv};
use tokenagent::trainer::{evaluate, EnvConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3000);
    let lr: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.5);
    let hidden: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(64);
    let embed: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(12);

    let cfg = HopConfig::default();
    let task = TaskVocab::new(cfg.n_entities, cfg.n_relations);
    let registry = search_registry();
    let dims = Dims {
        vocab_size: task.size(),
        window: 20,
        embed,
        hidden,
        separate_critic: false,
    };
    let mut params = init_params(0, dims)?;

    // oracle demonstrations, fresh instances every step
    for step in 0..steps {
        let mut samples = Vec::new();
        for i in 0..16u64 {
            let seed = derive_seed(1_000_000 + step, i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = generate_instance(&mut rng, &task, &cfg, seed)?;
            let mut env = ToolEnv::new(
                &inst,
                &task,
                &registry,
                Limits::default(),
                ProcessRewardConfig::default(),
                cfg.top_k,
                0,
            );
            let mut actor = ScriptedActor::from_turns(&oracle_turns(&inst));
            let rec = rollout_episode(&mut actor, &mut env, inst.seed, 0)?;
            let t = &rec.trajectory;
            for p in 0..t.tokens.len() {
                if t.mask[p] == 1 {
                    samples.push(BackwardSample {
                        context: context_window(&t.tokens, p, dims.window, PAD),
                        token: t.tokens[p],
                        d_logprob: -1.0, // minimize mean NLL; scaled below
                        d_value: 0.0,
                    });
                }
            }
        }
        let n = samples.len() as f64;
        for s in &mut samples {
            s.d_logprob /= n;
        }
        let grad = backward(&params, &samples)?;
        apply_gradient(&mut params, &grad, lr, 1.0)?;

        if (step + 1) % 100 == 0 {
            let nll = samples
                .iter()
                .map(|s| {
                    let out = tokenagent::policy::forward(&params, &s.context).unwrap();
                    -tokenagent::policy::logprob(&out.logits, s.token)
                })
                .sum::<f64>()
                / n;
            let em = held_out_em(&params, &task, &cfg)?;
            println!(
                "step {:>4}: train NLL {nll:.3}   held-out greedy EM {em:.3}",
                step + 1
            );
        }
    }
    Ok(())
}

fn held_out_em(
    params: &tokenagent::policy::PolicyParams,
    task: &TaskVocab,
    cfg: &HopConfig,
) -> anyhow::Result<f64> {
    let instances: Vec<_> = (0..64u64)
        .map(|i| {
            let seed = derive_seed(555, i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            generate_instance(&mut rng, task, cfg, seed)
        })
        .collect::<Result<_, _>>()?;
    let env_cfg = EnvConfig {
        hop: cfg.clone(),
        ..EnvConfig::default()
    };
    Ok(evaluate(params, &instances, task, &env_cfg)?.mean_em)
}
