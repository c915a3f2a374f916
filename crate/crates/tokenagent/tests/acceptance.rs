//! Acceptance gate: one test per criterion, each printing a single
//! `criterion N: PASS/FAIL` line (visible with `--nocapture`, or on
//! failure). Tolerances are pinned here and must not be loosened.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tokenagent::hopqa::{
    generate_instance, oracle_turns, outcome_reward, search_registry, HopConfig, TaskVocab,
    ANS_CLOSE, ANS_OPEN, TOOL_CLOSE, TOOL_OPEN,
};
use tokenagent::policy::{backward, forward, init_params, logprob, BackwardSample, Dims};
use tokenagent::rl::{
    actor_loss, critic_loss, grpo_advantages, masked_gae, reinforce_pp_advantages,
    rloo_advantages, Algorithm,
};
use tokenagent::rollout::{derive_seed, rollout_episode, ScriptedActor};
use tokenagent::tool_env::{Limits, ProcessRewardConfig, ToolEnv};
use tokenagent::tool_protocol::{
    extract_tool_calls, wrap_tool_call, ParseErrorKind, ToolCall,
};
use tokenagent::trainer::{evaluate, eval_instances, run_ablation, train, RunConfig, TrainOptions};
use tokenagent::vocab::TokenId;

fn report(n: usize, name: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n} ({name}): {status} — {detail}");
    assert!(pass, "criterion {n} ({name}): FAIL — {detail}");
}

// ---------------------------------------------------------------- 1: GAE

/// Monte-Carlo oracle at λ=1: discounted (over action steps) reward-to-go
/// minus the value, independent of the recursion under test.
fn mc_oracle(rewards: &[f64], values: &[f64], mask: &[u8], gamma: f64) -> Vec<f64> {
    let idx: Vec<usize> = (0..mask.len()).filter(|&i| mask[i] == 1).collect();
    let mut out = vec![0.0; mask.len()];
    for (j, &i) in idx.iter().enumerate() {
        let mut rtg = 0.0;
        let mut disc = 1.0;
        for &k in &idx[j..] {
            rtg += disc * rewards[k];
            disc *= gamma;
        }
        out[i] = rtg - values[i];
    }
    out
}

#[test]
fn criterion_1_gae_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let len = rng.gen_range(1..=16);
        let mut mask: Vec<u8> = (0..len).map(|_| u8::from(rng.gen_bool(0.6))).collect();
        if !mask.contains(&1) {
            mask[len - 1] = 1;
        }
        let rewards: Vec<f64> = mask
            .iter()
            .map(|&m| if m == 1 { rng.gen_range(-1.0..1.0) } else { 0.0 })
            .collect();
        let values: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for gamma in [0.0, 0.5, 0.9, 1.0] {
            let (adv, _) = masked_gae(&rewards, &values, &mask, gamma, 1.0, true).unwrap();
            let oracle = mc_oracle(&rewards, &values, &mask, gamma);
            for i in 0..len {
                if mask[i] == 1 {
                    worst = worst.max((adv[i] - oracle[i]).abs());
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "gae oracle equivalence",
        worst < 1e-10 && secs < 5.0,
        &format!("max |error| {worst:.2e} over 1000 trajectories x 4 gammas in {secs:.2}s"),
    );
}

// ----------------------------------------------------- 2: gradient checks

fn policy_fd_worst(seed: u64, separate_critic: bool) -> f64 {
    let dims = Dims {
        vocab_size: 16,
        window: 4,
        embed: 4,
        hidden: 8,
        separate_critic,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = init_params(seed, dims).unwrap();
    let context: Vec<TokenId> = (0..4).map(|_| TokenId(rng.gen_range(0..16))).collect();
    let token = TokenId(rng.gen_range(0..16));
    let (d_lp, d_v) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let analytic = backward(
        &params,
        &[BackwardSample {
            context: context.clone(),
            token,
            d_logprob: d_lp,
            d_value: d_v,
        }],
    )
    .unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..params.theta.len() {
        let mut plus = params.clone();
        plus.theta[i] += h;
        let mut minus = params.clone();
        minus.theta[i] -= h;
        let eval = |p: &tokenagent::policy::PolicyParams| {
            let out = forward(p, &context).unwrap();
            d_lp * logprob(&out.logits, token) + d_v * out.value
        };
        let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
        let denom = analytic[i].abs().max(fd.abs()).max(1e-6);
        worst = worst.max((analytic[i] - fd).abs() / denom);
    }
    worst
}

#[test]
fn criterion_2_gradient_correctness() {
    let start = Instant::now();
    let mut worst_policy: f64 = 0.0;
    for seed in 0..20u64 {
        worst_policy = worst_policy.max(policy_fd_worst(seed, seed % 2 == 1));
    }

    // loss-level analytic gradients vs finite differences
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_loss: f64 = 0.0;
    let eps = 0.2;
    for _ in 0..50 {
        let n = rng.gen_range(3..10);
        let mask: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.7))).collect();
        if mask.iter().all(|&m| m == 0) {
            continue;
        }
        let old: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..-0.1)).collect();
        // keep ratios away from the clip kink so FD is valid
        let new: Vec<f64> = old
            .iter()
            .map(|o| {
                let mut d;
                loop {
                    d = rng.gen_range(-0.4..0.4);
                    let ratio: f64 = f64::exp(d);
                    if (ratio - (1.0 + eps)).abs() > 1e-2 && (ratio - (1.0 - eps)).abs() > 1e-2 {
                        break;
                    }
                }
                o + d
            })
            .collect();
        let adv: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, grad) = actor_loss(&old, &new, &adv, &mask, eps, true).unwrap();
        let h = 1e-7;
        for i in 0..n {
            let mut np = new.clone();
            np[i] += h;
            let mut nm = new.clone();
            nm[i] -= h;
            let (lp, _) = actor_loss(&old, &np, &adv, &mask, eps, true).unwrap();
            let (lm, _) = actor_loss(&old, &nm, &adv, &mask, eps, true).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let denom = grad[i].abs().max(fd.abs()).max(1e-3);
            worst_loss = worst_loss.max((grad[i] - fd).abs() / denom);
        }

        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let returns: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, vgrad) = critic_loss(&values, &returns, &mask).unwrap();
        for i in 0..n {
            let mut vp = values.clone();
            vp[i] += h;
            let mut vm = values.clone();
            vm[i] -= h;
            let (lp, _) = critic_loss(&vp, &returns, &mask).unwrap();
            let (lm, _) = critic_loss(&vm, &returns, &mask).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let denom = vgrad[i].abs().max(fd.abs()).max(1e-3);
            worst_loss = worst_loss.max((vgrad[i] - fd).abs() / denom);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        "policy gradient correctness",
        worst_policy < 1e-4 && worst_loss < 1e-6 && secs < 30.0,
        &format!(
            "policy FD rel err {worst_policy:.2e} (<1e-4), loss FD rel err {worst_loss:.2e} (<1e-6), {secs:.2}s"
        ),
    );
}

// -------------------------------------------------- 3: mask exclusion

#[test]
fn criterion_3_mask_exclusion_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut all_exact = true;
    for _ in 0..1000 {
        let n = rng.gen_range(2..20);
        let mut mask: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.5))).collect();
        if mask.iter().all(|&m| m == 0) {
            mask[0] = 1;
        }
        let old: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..0.0)).collect();
        let new: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..0.0)).collect();
        let adv: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (l1, g1) = actor_loss(&old, &new, &adv, &mask, 0.2, true).unwrap();

        let mut old2 = old.clone();
        let mut new2 = new.clone();
        let mut adv2 = adv.clone();
        for i in 0..n {
            if mask[i] == 0 {
                old2[i] = rng.gen_range(-50.0..50.0);
                new2[i] = rng.gen_range(-50.0..50.0);
                adv2[i] = rng.gen_range(-50.0..50.0);
            }
        }
        let (l2, g2) = actor_loss(&old2, &new2, &adv2, &mask, 0.2, true).unwrap();
        all_exact &= l1.to_bits() == l2.to_bits();
        for i in 0..n {
            if mask[i] == 1 {
                all_exact &= g1[i].to_bits() == g2[i].to_bits();
            }
        }
    }
    report(
        3,
        "mask exclusion invariance",
        all_exact,
        "loss and gradients bit-identical under mask=0 mutations, 1000 cases",
    );
}

// ------------------------------------------------ 4: estimator oracles

#[test]
fn criterion_4_estimator_hand_oracles() {
    // leave-one-out baselines with exactly representable arithmetic
    let rloo_exact = rloo_advantages(&[1.0, 0.0, 0.0]).unwrap() == vec![1.0, -0.5, -0.5]
        && rloo_advantages(&[1.0, 0.0, 0.0, 1.0])
            .unwrap()
            .iter()
            .zip([2.0 / 3.0, -2.0 / 3.0, -2.0 / 3.0, 2.0 / 3.0])
            .all(|(a, e)| (a - e).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut grpo_centered = true;
    for _ in 0..200 {
        let g = rng.gen_range(2..12);
        let rewards: Vec<f64> = (0..g).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let eps = 1e-8;
        let adv = grpo_advantages(&rewards, eps).unwrap();
        let max_r = rewards.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        grpo_centered &= adv.iter().sum::<f64>().abs() <= g as f64 * eps * max_r.max(1.0);
    }

    // two single-group trajectories, rewards 1 and 0, group-mean baseline
    // 0.5: reward-to-go minus baseline gives +-0.5 at every action token
    let rewards = vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]];
    let masks = vec![vec![1u8, 1, 1], vec![1u8, 1, 1]];
    let rpp =
        reinforce_pp_advantages(&rewards, &masks, &[0, 0], 1.0, true, true, 1e-8, false).unwrap();
    let rpp_exact = rpp == vec![vec![0.5, 0.5, 0.5], vec![-0.5, -0.5, -0.5]];

    report(
        4,
        "estimator hand-oracles",
        rloo_exact && grpo_centered && rpp_exact,
        &format!("rloo exact {rloo_exact}, grpo centered {grpo_centered}, reinforce++ exact {rpp_exact}"),
    );
}

// ----------------------------------------------------- 5: codec round trip

#[test]
fn criterion_5_codec_round_trip() {
    let task = TaskVocab::new(28, 10);
    let vocab = task.vocab();
    let registry = search_registry();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ok = true;
    for _ in 0..10_000 {
        let mut arguments = vec![task.entity(rng.gen_range(0..28))];
        if rng.gen_bool(0.5) {
            arguments.push(task.relation(rng.gen_range(0..10)));
        }
        let call = ToolCall {
            tool_name: "search".into(),
            arguments,
        };
        let tokens = wrap_tool_call(&call, vocab).unwrap();
        ok &= extract_tool_calls(&tokens, vocab, &registry) == Ok(vec![call]);
    }

    let e0 = task.entity(0);
    let kind = |toks: &[TokenId]| extract_tool_calls(toks, vocab, &registry).unwrap_err().kind;
    let malformed_ok = kind(&[TOOL_CLOSE]) == ParseErrorKind::UnmatchedMarker
        && kind(&[TOOL_OPEN, e0]) == ParseErrorKind::UnmatchedMarker
        && kind(&[TOOL_OPEN, TOOL_OPEN, e0, TOOL_CLOSE]) == ParseErrorKind::UnmatchedMarker
        && kind(&[TOOL_OPEN, TOOL_CLOSE]) == ParseErrorKind::EmptySpan
        && kind(&[TOOL_OPEN, e0, e0, TOOL_CLOSE]) == ParseErrorKind::UnknownTool
        && kind(&wrap_tool_call(
            &ToolCall {
                tool_name: "search".into(),
                arguments: vec![e0, task.relation(0), e0],
            },
            vocab,
        )
        .unwrap()) == ParseErrorKind::ArityViolation;

    report(
        5,
        "codec round trip",
        ok && malformed_ok,
        &format!("10,000 random calls round-tripped: {ok}; malformed classes mapped: {malformed_ok}"),
    );
}

// --------------------------------------------------------- 6: reward table

#[test]
fn criterion_6_reward_table() {
    let task = TaskVocab::new(28, 10);
    let vocab = task.vocab();
    let registry = search_registry();
    let gold = task.entity(3);
    let wrong = task.entity(4);

    // prompt mask 0, then one agent segment
    let case = |agent: &[TokenId]| {
        let mut tokens = vec![task.entity(0)];
        let mut mask = vec![0u8];
        tokens.extend_from_slice(agent);
        mask.extend(std::iter::repeat(1).take(agent.len()));
        outcome_reward(&tokens, &mask, gold, vocab, &registry)
    };

    let clean_correct = case(&[ANS_OPEN, gold, ANS_CLOSE]);
    let clean_wrong = case(&[ANS_OPEN, wrong, ANS_CLOSE]);
    let missing_answer = case(&[wrong, wrong]);
    let both_bad = case(&[TOOL_OPEN, wrong]);

    let pass = clean_correct == 1.0
        && clean_wrong == 0.0
        && missing_answer == -0.5
        && both_bad == -1.0;
    report(
        6,
        "outcome reward table",
        pass,
        &format!("got [{clean_correct}, {clean_wrong}, {missing_answer}, {both_bad}] for [1, 0, -0.5, -1]"),
    );
}

// --------------------------------------------------------- 7: solvability

#[test]
fn criterion_7_solvability_oracle() {
    let registry = search_registry();
    let mut all = true;
    for hops in [1u32, 2] {
        let cfg = HopConfig {
            hops,
            ..HopConfig::default()
        };
        let task = TaskVocab::new(cfg.n_entities, cfg.n_relations);
        for i in 0..250u64 {
            let seed = derive_seed(7_000 + u64::from(hops), i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = generate_instance(&mut rng, &task, &cfg, seed).unwrap();
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
            let rec = rollout_episode(&mut actor, &mut env, inst.seed, 0).unwrap();
            all &= rec.episode_reward == 1.0;
            let ans = tokenagent::hopqa::extracted_answer(&rec.trajectory.tokens, &rec.trajectory.mask);
            all &= ans.as_deref() == Some(&[inst.gold_answer][..]);
        }
    }
    report(
        7,
        "solvability oracle",
        all,
        "scripted gold-chain agent: EM 1.0 and reward 1.0 on 500 instances (hops 1 and 2)",
    );
}

// ------------------------------------------------------- 8: learning check

#[test]
fn criterion_8_learning_check() {
    let start = Instant::now();
    let opts = TrainOptions {
        single_thread: true,
        ..TrainOptions::default()
    };

    let run = |algorithm: Algorithm, seed: u64| -> (f64, f64) {
        let mut config = RunConfig::default();
        config.rl.algorithm = algorithm;
        config.seed = seed;
        let task = TaskVocab::new(config.env.hop.n_entities, config.env.hop.n_relations);
        let untrained = init_params(derive_seed(seed, 0), config.dims(&task)).unwrap();
        let held_out = eval_instances(&config, &task).unwrap();
        let em0 = evaluate(&untrained, &held_out, &task, &config.env)
            .unwrap()
            .mean_em;
        let result = train(&config, &opts).unwrap();
        (em0, result.final_eval.mean_em)
    };

    let ppo: Vec<(f64, f64)> = (1..=3).map(|s| run(Algorithm::Ppo, s)).collect();
    let grpo: Vec<(f64, f64)> = (1..=3).map(|s| run(Algorithm::Grpo, s)).collect();
    let secs = start.elapsed().as_secs_f64();

    let untrained_ok = ppo.iter().chain(&grpo).all(|&(em0, _)| em0 <= 0.1);
    let ppo_ok = ppo.iter().all(|&(_, em)| em >= 0.8);
    let grpo_ok = grpo.iter().filter(|&&(_, em)| em >= 0.6).count() >= 2;
    let budget_ok = secs <= 15.0 * 60.0;

    report(
        8,
        "learning check",
        untrained_ok && ppo_ok && grpo_ok && budget_ok,
        &format!(
            "ppo EM {:?} (need >=0.8 each), grpo EM {:?} (need >=0.6 on 2/3), untrained {:?} (need <=0.1), {secs:.0}s (budget 900s)",
            ppo.iter().map(|p| p.1).collect::<Vec<_>>(),
            grpo.iter().map(|p| p.1).collect::<Vec<_>>(),
            ppo.iter().chain(&grpo).map(|p| p.0).collect::<Vec<_>>(),
        ),
    );
}

// --------------------------------------------------- 9: ablation direction

#[test]
fn criterion_9_ablation_direction() {
    let opts = TrainOptions {
        single_thread: true,
        ..TrainOptions::default()
    };
    let mut config = RunConfig::default();
    config.env.hop.hops = 2;
    config.schedule.updates = 40;
    config.schedule.episodes_per_update = 32;
    config.schedule.eval_set_size = 32;
    config.seeds = vec![1, 2, 3, 4, 5];

    let median = |report: &tokenagent::trainer::AblationReport, arm: &str| -> f64 {
        report
            .medians
            .iter()
            .find(|(_, a, _)| a == arm)
            .map(|&(_, _, m)| m)
            .unwrap()
    };

    config.rl.algorithm = Algorithm::Ppo;
    let ppo = run_ablation(&config, &opts).unwrap();
    let ppo_on = median(&ppo, "masks_on");
    let ppo_adv_off = median(&ppo, "adv_mask_off");
    let ppo_both_off = median(&ppo, "both_masks_off");

    config.rl.algorithm = Algorithm::Grpo;
    let grpo = run_ablation(&config, &opts).unwrap();
    let grpo_on = median(&grpo, "loss_mask_on");
    let grpo_off = median(&grpo, "loss_mask_off");

    let pass = ppo_on >= ppo_both_off && ppo_on >= ppo_adv_off && grpo_on >= grpo_off;
    report(
        9,
        "ablation direction",
        pass,
        &format!(
            "ppo medians: on {ppo_on:.3} vs adv-off {ppo_adv_off:.3} vs both-off {ppo_both_off:.3}; grpo: on {grpo_on:.3} vs off {grpo_off:.3} (ties allowed)"
        ),
    );
}

// ------------------------------------------------------- 10: determinism

#[test]
fn criterion_10_byte_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    std::fs::write(
        &config_path,
        r#"{"schedule": {"updates": 6, "episodes_per_update": 16, "eval_interval": 3, "eval_set_size": 8}}"#,
    )
    .unwrap();

    let run = |out: &str| {
        let out_dir = dir.path().join(out);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_tokenagent"))
            .args([
                "train",
                "--config",
                config_path.to_str().unwrap(),
                "--seed",
                "9",
                "--single-thread",
                "--out",
                out_dir.to_str().unwrap(),
            ])
            .stderr(std::process::Stdio::null())
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out_dir.join("metrics.csv")).unwrap()
    };

    let a = run("a");
    let b = run("b");
    report(
        10,
        "byte determinism",
        a == b,
        &format!("two --single-thread runs: metrics.csv identical ({} bytes)", a.len()),
    );
}
