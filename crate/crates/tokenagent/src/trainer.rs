//! The learning stage and experiment surface: training loop, greedy
//! evaluation, and the mask-ablation runner.
//!
//! Everything is driven by one `RunConfig` (JSON on disk, serde defaults
//! for every field) and a master seed. Episode collection, instance
//! generation, and evaluation all derive their seeds from it, so a run is
//! fully reproducible; wall-clock time is the one nondeterministic metric
//! column and is zeroed in `--single-thread` byte-reproducible mode.

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hopqa::{
    extracted_answer, generate_instance, instances_to_jsonl, search_registry, HopConfig, HopError,
    Instance, TaskVocab, PAD,
};
use crate::policy::{
    apply_gradient, context_window, forward, init_params, logprob, BackwardSample, Decode, Dims,
    PolicyActor, PolicyError, PolicyParams,
};
use crate::rl::{
    actor_loss, broadcast_scalar_advantage, critic_loss, grpo_advantages, masked_gae,
    reinforce_pp_advantages, rloo_advantages, whiten, Algorithm, RlConfig, RlError,
};
use crate::rollout::{derive_seed, rollout_episode, rollout_group, RolloutError, RolloutRecord};
use crate::token_mdp::TerminationReason;
use crate::tool_env::{Limits, ProcessRewardConfig, ToolEnv};
use crate::vocab::TokenId;

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Generation(#[from] HopError),
    #[error("config error: {0}")]
    Config(String),
    #[error("non-finite loss at update {update}; offending batch dumped: {dumped}")]
    Numerical { update: usize, dumped: bool },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub hop: HopConfig,
    pub limits: Limits,
    pub process_rewards: ProcessRewardConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            hop: HopConfig::default(),
            limits: Limits::default(),
            process_rewards: ProcessRewardConfig::default(),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub window: usize,
    pub embed: usize,
    pub hidden: usize,
    pub separate_critic: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            window: 20,
            embed: 12,
            hidden: 64,
            separate_critic: false,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub grad_clip: f64,
    pub epochs_per_batch: usize,
    pub minibatch_size: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.2,
            grad_clip: 1.0,
            epochs_per_batch: 2,
            minibatch_size: 16,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub updates: usize,
    pub episodes_per_update: usize,
    pub eval_interval: usize,
    pub eval_set_size: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            updates: 200,
            episodes_per_update: 64,
            eval_interval: 10,
            eval_set_size: 64,
        }
    }
}

/// Everything a run needs; mirrors the on-disk JSON config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub rl: RlConfig,
    pub policy: PolicyConfig,
    pub optimizer: OptimizerConfig,
    pub schedule: ScheduleConfig,
    pub temperature: f64,
    pub seed: u64,
    /// Seed list for multi-seed ablation arms.
    pub seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            rl: RlConfig::default(),
            policy: PolicyConfig::default(),
            optimizer: OptimizerConfig::default(),
            schedule: ScheduleConfig::default(),
            temperature: 1.0,
            seed: 0,
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), TrainerError> {
        self.rl.validate()?;
        let s = &self.schedule;
        if s.updates == 0 || s.episodes_per_update == 0 || s.eval_interval == 0 || s.eval_set_size == 0
        {
            return Err(TrainerError::Config("schedule counts must be positive".into()));
        }
        if self.optimizer.epochs_per_batch == 0 || self.optimizer.minibatch_size == 0 {
            return Err(TrainerError::Config("optimizer counts must be positive".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(TrainerError::Config("temperature must be positive".into()));
        }
        if self.rl.algorithm.uses_groups() && self.schedule.episodes_per_update < self.rl.group_size
        {
            return Err(TrainerError::Config(
                "episodes_per_update must cover at least one group".into(),
            ));
        }
        Ok(())
    }

    pub fn dims(&self, task: &TaskVocab) -> Dims {
        Dims {
            vocab_size: task.size(),
            window: self.policy.window,
            embed: self.policy.embed,
            hidden: self.policy.hidden,
            separate_critic: self.policy.separate_critic,
        }
    }
}

/// One row of metrics.csv.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub update: usize,
    pub mean_reward: f64,
    pub eval_em: f64,
    pub mean_len: f64,
    pub mean_turns: f64,
    pub parse_failure_rate: f64,
    pub actor_loss: f64,
    pub critic_loss: Option<f64>,
    pub wall_clock_s: f64,
}

pub const METRICS_HEADER: &str =
    "update,mean_reward,eval_em,mean_len,mean_turns,parse_failure_rate,actor_loss,critic_loss,wall_clock_s";

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        let critic = self
            .critic_loss
            .map(|c| format!("{c:.6}"))
            .unwrap_or_default();
        format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{:.3}",
            self.update,
            self.mean_reward,
            self.eval_em,
            self.mean_len,
            self.mean_turns,
            self.parse_failure_rate,
            self.actor_loss,
            critic,
            self.wall_clock_s,
        )
    }
}

pub fn metrics_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.to_csv_line());
    }
    out
}

/// Per-instance evaluation record for eval.jsonl.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalRecord {
    pub instance_seed: u64,
    pub em: u8,
    pub reward: f64,
    pub answer: Option<Vec<String>>,
    pub gold: String,
}

#[derive(Clone, Debug)]
pub struct EvalOutput {
    pub mean_em: f64,
    pub records: Vec<EvalRecord>,
}

impl EvalOutput {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = writeln!(out, "{}", serde_json::to_string(r).expect("record serializes"));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub metrics: Vec<MetricsRow>,
    pub params: PolicyParams,
    pub final_eval: EvalOutput,
    pub trajectory_dump: Option<String>,
}

/// Side knobs that are not part of the experiment definition.
#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    /// Byte-reproducible mode: zero the wall-clock column.
    pub single_thread: bool,
    /// Collect a JSONL dump of every training trajectory.
    pub dump_trajectories: bool,
    /// Per-update progress on stderr.
    pub verbose: bool,
}

/// Held-out instances come from a seed range disjoint from the training
/// stream by construction.
pub fn eval_instances(config: &RunConfig, task: &TaskVocab) -> Result<Vec<Instance>, TrainerError> {
    let base = derive_seed(config.seed, 2);
    (0..config.schedule.eval_set_size as u64)
        .map(|i| {
            let seed = derive_seed(base, i);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            generate_instance(&mut rng, task, &config.env.hop, seed).map_err(Into::into)
        })
        .collect()
}

/// Greedy-decode the policy on an instance set and report mean EM.
pub fn evaluate(
    params: &PolicyParams,
    instances: &[Instance],
    task: &TaskVocab,
    env_cfg: &EnvConfig,
) -> Result<EvalOutput, TrainerError> {
    let registry = search_registry();
    let mut records = Vec::with_capacity(instances.len());
    let mut total = 0.0;
    for inst in instances {
        let mut env = ToolEnv::new(
            inst,
            task,
            &registry,
            env_cfg.limits,
            env_cfg.process_rewards,
            env_cfg.hop.top_k,
            derive_seed(inst.seed, 1),
        );
        let mut actor = PolicyActor::new(params, Decode::Greedy, PAD, 0);
        let rec = rollout_episode(&mut actor, &mut env, inst.seed, inst.seed)?;
        let answer = extracted_answer(&rec.trajectory.tokens, &rec.trajectory.mask);
        let em = match &answer {
            Some(span) => crate::hopqa::exact_match(span, inst.gold_answer),
            None => 0,
        };
        total += f64::from(em);
        records.push(EvalRecord {
            instance_seed: inst.seed,
            em,
            reward: rec.episode_reward,
            answer: answer.map(|a| task.vocab().decode(&a)),
            gold: task.vocab().symbol(inst.gold_answer).to_string(),
        });
    }
    Ok(EvalOutput {
        mean_em: total / instances.len().max(1) as f64,
        records,
    })
}

struct Batch {
    records: Vec<RolloutRecord>,
    /// Parallel to `records`: which rollout group each trajectory is in.
    group_ids: Vec<usize>,
}

fn collect_batch(
    config: &RunConfig,
    task: &TaskVocab,
    params: &PolicyParams,
    update: usize,
) -> Result<Batch, TrainerError> {
    let registry = search_registry();
    let train_base = derive_seed(config.seed, 1);
    let update_base = derive_seed(train_base, update as u64);
    let group_size = if config.rl.algorithm.uses_groups() {
        config.rl.group_size
    } else {
        1
    };
    let n_groups = (config.schedule.episodes_per_update / group_size).max(1);

    let mut records = Vec::with_capacity(n_groups * group_size);
    let mut group_ids = Vec::with_capacity(n_groups * group_size);
    for g in 0..n_groups {
        let inst_seed = derive_seed(update_base, g as u64);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(inst_seed);
        let instance = generate_instance(&mut rng, task, &config.env.hop, inst_seed)?;
        let group = rollout_group(
            params,
            &instance,
            task,
            &registry,
            config.env.limits,
            config.env.process_rewards,
            config.env.hop.top_k,
            group_size,
            Decode::Sample {
                temperature: config.temperature,
            },
            inst_seed,
        )?;
        group_ids.extend(std::iter::repeat(g).take(group.len()));
        records.extend(group);
    }
    Ok(Batch { records, group_ids })
}

/// Per-trajectory advantages (and, for PPO, critic return targets).
fn compute_advantages(
    config: &RunConfig,
    batch: &Batch,
) -> Result<(Vec<Vec<f64>>, Option<Vec<Vec<f64>>>), TrainerError> {
    let rl = &config.rl;
    let trajs: Vec<_> = batch.records.iter().map(|r| &r.trajectory).collect();
    match rl.algorithm {
        Algorithm::Ppo => {
            let mut advs = Vec::with_capacity(trajs.len());
            let mut rets = Vec::with_capacity(trajs.len());
            for t in &trajs {
                let (a, r) = masked_gae(
                    &t.rewards,
                    &t.values,
                    &t.mask,
                    rl.gamma,
                    rl.lambda,
                    rl.advantage_mask_enabled,
                )?;
                advs.push(a);
                rets.push(r);
            }
            if rl.whiten_advantages {
                let mut flat_idx = Vec::new();
                for (ti, t) in trajs.iter().enumerate() {
                    for i in 0..t.len() {
                        if !rl.advantage_mask_enabled || t.mask[i] == 1 {
                            flat_idx.push((ti, i));
                        }
                    }
                }
                let mut vals: Vec<f64> = flat_idx.iter().map(|&(t, i)| advs[t][i]).collect();
                let idx: Vec<usize> = (0..vals.len()).collect();
                whiten(&mut vals, &idx, rl.norm_eps);
                for (&(t, i), v) in flat_idx.iter().zip(&vals) {
                    advs[t][i] = *v;
                }
            }
            Ok((advs, Some(rets)))
        }
        Algorithm::Grpo | Algorithm::Rloo => {
            let n_groups = batch.group_ids.iter().max().map_or(0, |m| m + 1);
            let mut advs = vec![Vec::new(); trajs.len()];
            for g in 0..n_groups {
                let members: Vec<usize> = batch
                    .group_ids
                    .iter()
                    .enumerate()
                    .filter(|(_, &gid)| gid == g)
                    .map(|(i, _)| i)
                    .collect();
                let rewards: Vec<f64> =
                    members.iter().map(|&i| batch.records[i].episode_reward).collect();
                let scalars = match rl.algorithm {
                    Algorithm::Grpo => grpo_advantages(&rewards, rl.norm_eps)?,
                    _ => rloo_advantages(&rewards)?,
                };
                for (&i, &s) in members.iter().zip(&scalars) {
                    advs[i] = broadcast_scalar_advantage(
                        &trajs[i].mask,
                        s,
                        rl.advantage_mask_enabled,
                    );
                }
            }
            Ok((advs, None))
        }
        Algorithm::ReinforcePp | Algorithm::ReinforcePpBaseline => {
            let rewards: Vec<Vec<f64>> = trajs.iter().map(|t| t.rewards.clone()).collect();
            let masks: Vec<Vec<u8>> = trajs.iter().map(|t| t.mask.clone()).collect();
            let advs = reinforce_pp_advantages(
                &rewards,
                &masks,
                &batch.group_ids,
                rl.gamma,
                rl.algorithm == Algorithm::ReinforcePpBaseline,
                rl.advantage_mask_enabled,
                rl.norm_eps,
                rl.whiten_advantages,
            )?;
            Ok((advs, None))
        }
    }
}

/// Re-score a trajectory under the current parameters: log-probabilities
/// at `lp_positions` and (optionally) values at mask=1 positions.
fn rescore(
    params: &PolicyParams,
    tokens: &[TokenId],
    lp_positions: &[usize],
    value_positions: &[usize],
) -> Result<(Vec<f64>, Vec<f64>), TrainerError> {
    let n = tokens.len();
    let mut new_lp = vec![0.0; n];
    let mut new_v = vec![0.0; n];
    let mut wanted: Vec<usize> = lp_positions.iter().chain(value_positions).copied().collect();
    wanted.sort_unstable();
    wanted.dedup();
    for &i in &wanted {
        let ctx = context_window(tokens, i, params.dims.window, PAD);
        let out = forward(params, &ctx)?;
        new_lp[i] = logprob(&out.logits, tokens[i]);
        new_v[i] = out.value;
    }
    Ok((new_lp, new_v))
}

struct UpdateStats {
    actor_loss: f64,
    critic_loss: Option<f64>,
}

fn update_policy(
    config: &RunConfig,
    params: &mut PolicyParams,
    batch: &Batch,
    advantages: &[Vec<f64>],
    returns: Option<&[Vec<f64>]>,
) -> Result<UpdateStats, TrainerError> {
    let rl = &config.rl;
    let opt = &config.optimizer;
    let n = batch.records.len();
    let mut last_actor = 0.0;
    let mut last_critic: Option<f64> = None;

    for _epoch in 0..opt.epochs_per_batch {
        let mut start = 0;
        while start < n {
            let end = (start + opt.minibatch_size).min(n);
            let mut cat_old = Vec::new();
            let mut cat_new = Vec::new();
            let mut cat_adv = Vec::new();
            let mut cat_mask = Vec::new();
            let mut cat_values = Vec::new();
            let mut cat_returns = Vec::new();
            // (trajectory index, position) per concatenated slot
            let mut slots: Vec<(usize, usize)> = Vec::new();

            for ti in start..end {
                let t = &batch.records[ti].trajectory;
                let lp_positions: Vec<usize> = (0..t.len())
                    .filter(|&i| !rl.loss_mask_enabled || t.mask[i] == 1)
                    .collect();
                let value_positions: Vec<usize> = if rl.algorithm.uses_critic() {
                    (0..t.len()).filter(|&i| t.mask[i] == 1).collect()
                } else {
                    Vec::new()
                };
                let (new_lp, new_v) = rescore(params, &t.tokens, &lp_positions, &value_positions)?;
                for i in 0..t.len() {
                    cat_old.push(t.old_logprobs[i]);
                    cat_new.push(new_lp[i]);
                    cat_adv.push(advantages[ti][i]);
                    cat_mask.push(t.mask[i]);
                    cat_values.push(new_v[i]);
                    cat_returns.push(returns.map_or(0.0, |r| r[ti][i]));
                    slots.push((ti, i));
                }
            }

            let (a_loss, mut d_lp) = actor_loss(
                &cat_old,
                &cat_new,
                &cat_adv,
                &cat_mask,
                rl.clip_eps,
                rl.loss_mask_enabled,
            )?;
            if !a_loss.is_finite() {
                return Err(TrainerError::Numerical {
                    update: 0,
                    dumped: false,
                });
            }
            last_actor = a_loss;

            // optional KL-to-rollout-policy penalty (k1 estimator), off by default
            if rl.kl_coef != 0.0 {
                let included: Vec<usize> = (0..cat_mask.len())
                    .filter(|&i| !rl.loss_mask_enabled || cat_mask[i] == 1)
                    .collect();
                let c = rl.kl_coef / included.len() as f64;
                for &i in &included {
                    d_lp[i] += c;
                }
            }

            let mut d_value = vec![0.0; cat_values.len()];
            if rl.algorithm.uses_critic() {
                let (c_loss, d_v) = critic_loss(&cat_values, &cat_returns, &cat_mask)?;
                if !c_loss.is_finite() {
                    return Err(TrainerError::Numerical {
                        update: 0,
                        dumped: false,
                    });
                }
                last_critic = Some(c_loss);
                d_value = d_v;
            }

            let mut samples = Vec::new();
            for (slot, &(ti, i)) in slots.iter().enumerate() {
                if d_lp[slot] == 0.0 && d_value[slot] == 0.0 {
                    continue;
                }
                let t = &batch.records[ti].trajectory;
                samples.push(BackwardSample {
                    context: context_window(&t.tokens, i, params.dims.window, PAD),
                    token: t.tokens[i],
                    d_logprob: d_lp[slot],
                    d_value: d_value[slot],
                });
            }
            let grad = crate::policy::backward(params, &samples)?;
            apply_gradient(params, &grad, opt.learning_rate, opt.grad_clip)?;
            start = end;
        }
    }
    Ok(UpdateStats {
        actor_loss: last_actor,
        critic_loss: last_critic,
    })
}

fn batch_stats(batch: &Batch) -> (f64, f64, f64, f64) {
    let n = batch.records.len() as f64;
    let mean_reward = batch.records.iter().map(|r| r.episode_reward).sum::<f64>() / n;
    let mean_len = batch
        .records
        .iter()
        .map(|r| r.trajectory.len() as f64)
        .sum::<f64>()
        / n;
    let mean_turns = batch
        .records
        .iter()
        .map(|r| {
            crate::hopqa::agent_segments(&r.trajectory.tokens, &r.trajectory.mask).len() as f64
        })
        .sum::<f64>()
        / n;
    let parse_failures = batch
        .records
        .iter()
        .filter(|r| r.trajectory.reason == TerminationReason::ParseFailure)
        .count() as f64
        / n;
    (mean_reward, mean_len, mean_turns, parse_failures)
}

/// Full training run: collect, estimate advantages, update, evaluate.
pub fn train(config: &RunConfig, options: &TrainOptions) -> Result<TrainResult, TrainerError> {
    config.validate()?;
    let task = TaskVocab::new(config.env.hop.n_entities, config.env.hop.n_relations);
    let mut params = init_params(derive_seed(config.seed, 0), config.dims(&task))?;
    let held_out = eval_instances(config, &task)?;
    let start_time = Instant::now();

    let mut metrics = Vec::with_capacity(config.schedule.updates);
    let mut last_em = evaluate(&params, &held_out, &task, &config.env)?.mean_em;
    let mut dump = options.dump_trajectories.then(String::new);

    for update in 0..config.schedule.updates {
        let batch = collect_batch(config, &task, &params, update)?;
        if let Some(d) = dump.as_mut() {
            for rec in &batch.records {
                let _ = writeln!(d, "{}", rec.trajectory.dump_line(task.vocab()));
            }
        }
        let (advantages, returns) = compute_advantages(config, &batch)?;
        let stats = update_policy(config, &mut params, &batch, &advantages, returns.as_deref())
            .map_err(|e| match e {
                TrainerError::Numerical { .. } => TrainerError::Numerical {
                    update,
                    dumped: false,
                },
                other => other,
            })?;

        if (update + 1) % config.schedule.eval_interval == 0
            || update + 1 == config.schedule.updates
        {
            last_em = evaluate(&params, &held_out, &task, &config.env)?.mean_em;
        }
        let (mean_reward, mean_len, mean_turns, parse_failure_rate) = batch_stats(&batch);
        let row = MetricsRow {
            update,
            mean_reward,
            eval_em: last_em,
            mean_len,
            mean_turns,
            parse_failure_rate,
            actor_loss: stats.actor_loss,
            critic_loss: stats.critic_loss,
            wall_clock_s: if options.single_thread {
                0.0
            } else {
                start_time.elapsed().as_secs_f64()
            },
        };
        if options.verbose {
            eprintln!(
                "update {:>4}  reward {:+.3}  em {:.3}  turns {:.2}  parse_fail {:.2}",
                row.update, row.mean_reward, row.eval_em, row.mean_turns, row.parse_failure_rate
            );
        }
        metrics.push(row);
    }

    let final_eval = evaluate(&params, &held_out, &task, &config.env)?;
    Ok(TrainResult {
        metrics,
        params,
        final_eval,
        trajectory_dump: dump,
    })
}

/// One arm of the ablation table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub algorithm: String,
    pub arm: String,
    pub seed: u64,
    pub eval_em: f64,
}

#[derive(Clone, Debug)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    /// (algorithm, arm, median EM), in arm order.
    pub medians: Vec<(String, String, f64)>,
}

impl AblationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("algorithm,arm,seed,eval_em\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{:.6}", r.algorithm, r.arm, r.seed, r.eval_em);
        }
        for (alg, arm, med) in &self.medians {
            let _ = writeln!(out, "{alg},{arm},median,{med:.6}");
        }
        out
    }
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// The mask-ablation arms for the configured algorithm: PPO disables the
/// advantage mask and then both masks; GRPO disables the loss mask.
pub fn ablation_arms(algorithm: Algorithm) -> Result<Vec<(&'static str, bool, bool)>, TrainerError> {
    // (arm name, loss_mask_enabled, advantage_mask_enabled)
    match algorithm {
        Algorithm::Ppo => Ok(vec![
            ("masks_on", true, true),
            ("adv_mask_off", true, false),
            ("both_masks_off", false, false),
        ]),
        Algorithm::Grpo => Ok(vec![
            ("loss_mask_on", true, true),
            ("loss_mask_off", false, true),
        ]),
        other => Err(TrainerError::Config(format!(
            "ablation supports ppo and grpo, not {}",
            other.as_str()
        ))),
    }
}

/// Run every arm over every configured seed and report per-seed EMs plus
/// per-arm medians.
pub fn run_ablation(
    config: &RunConfig,
    options: &TrainOptions,
) -> Result<AblationReport, TrainerError> {
    let arms = ablation_arms(config.rl.algorithm)?;
    if config.seeds.is_empty() {
        return Err(TrainerError::Config("ablation needs a non-empty seed list".into()));
    }
    let mut rows = Vec::new();
    let mut medians = Vec::new();
    for (arm, loss_mask, adv_mask) in arms {
        let mut ems = Vec::new();
        for &seed in &config.seeds {
            let mut arm_config = config.clone();
            arm_config.seed = seed;
            arm_config.rl.loss_mask_enabled = loss_mask;
            arm_config.rl.advantage_mask_enabled = adv_mask;
            if options.verbose {
                eprintln!(
                    "ablation arm {} ({}) seed {seed}",
                    arm,
                    config.rl.algorithm.as_str()
                );
            }
            let result = train(&arm_config, options)?;
            let em = result.final_eval.mean_em;
            ems.push(em);
            rows.push(AblationRow {
                algorithm: config.rl.algorithm.as_str().to_string(),
                arm: arm.to_string(),
                seed,
                eval_em: em,
            });
        }
        medians.push((
            config.rl.algorithm.as_str().to_string(),
            arm.to_string(),
            median(&mut ems),
        ));
    }
    Ok(AblationReport { rows, medians })
}

/// Render the held-out instance set of a config as JSONL.
pub fn eval_set_jsonl(config: &RunConfig) -> Result<String, TrainerError> {
    let task = TaskVocab::new(config.env.hop.n_entities, config.env.hop.n_relations);
    let instances = eval_instances(config, &task)?;
    Ok(instances_to_jsonl(&instances, task.vocab()))
}
