//! The multi-turn generation stage: drive an actor token by token, detect
//! triggers, call the environment, and splice feedback in with mask 0.
//!
//! A turn's action segment ends at the first of {complete tool call,
//! ANS_CLOSE, EOS, per-turn token limit, total token limit}. The outcome
//! reward lands on the last action token; process rewards land on the
//! TOOL_CLOSE of the triggering call. Values and log-probabilities are
//! recorded at every position, including mask=0 ones, so the
//! advantage-mask and loss-mask ablations never need rollouts re-run.

use thiserror::Error;

use crate::hopqa::{ANS_CLOSE, EOS};
use crate::policy::{Actor, ActorChoice, PolicyError};
use crate::token_mdp::{
    compute_action_mask, MdpError, Segment, Trajectory, TransitionKind,
};
use crate::tool_env::{EnvError, ToolEnv};
use crate::tool_protocol::detect_tool_call_trigger;
use crate::vocab::TokenId;

#[derive(Debug, Error)]
pub enum RolloutError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// One finished episode: the trajectory plus bookkeeping for grouping.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutRecord {
    pub trajectory: Trajectory,
    pub episode_reward: f64,
    pub instance_id: u64,
    pub seed: u64,
}

/// Stable per-index seed derivation (splitmix64 over base ^ index).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Run one episode of actor/environment interaction to termination.
pub fn rollout_episode<A: Actor>(
    actor: &mut A,
    env: &mut ToolEnv,
    instance_id: u64,
    seed: u64,
) -> Result<RolloutRecord, RolloutError> {
    let limits = env.limits();
    let prompt = env.prompt().to_vec();

    let mut tokens: Vec<TokenId> = Vec::with_capacity(prompt.len() + limits.max_total_tokens);
    let mut mask: Vec<u8> = Vec::new();
    let mut rewards: Vec<f64> = Vec::new();
    let mut old_logprobs: Vec<f64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut segments: Vec<Segment> = Vec::new();

    for &tok in &prompt {
        let (lp, v) = actor.score(&tokens, tok);
        tokens.push(tok);
        mask.push(0);
        rewards.push(0.0);
        old_logprobs.push(lp);
        values.push(v);
    }
    segments.push(Segment {
        start: 0,
        len: prompt.len(),
        kind: TransitionKind::Environmental,
        is_prompt: true,
    });

    let reason = loop {
        // one turn of generation
        let turn_start = tokens.len();
        loop {
            let choice = actor.next_token(&tokens)?;
            tokens.push(choice.token);
            mask.push(1);
            rewards.push(0.0);
            old_logprobs.push(choice.logprob);
            values.push(choice.value);

            let turn = &tokens[turn_start..];
            if choice.token == EOS || choice.token == ANS_CLOSE {
                break;
            }
            if detect_tool_call_trigger(turn, env.vocab()) == Some(turn.len() - 1) {
                break;
            }
            if turn.len() >= limits.max_tokens_per_turn {
                break;
            }
            if env.total_tokens() + turn.len() >= limits.max_total_tokens {
                break;
            }
        }
        let turn = tokens[turn_start..].to_vec();
        segments.push(Segment {
            start: turn_start,
            len: turn.len(),
            kind: TransitionKind::Generative,
            is_prompt: false,
        });

        let outcome = env.step(&turn)?;

        if outcome.process_reward != 0.0 {
            let close = detect_tool_call_trigger(&turn, env.vocab())
                .expect("process reward implies a complete tool call");
            rewards[turn_start + close] += outcome.process_reward;
        }

        if !outcome.feedback_tokens.is_empty() {
            let fb_start = tokens.len();
            for &tok in &outcome.feedback_tokens {
                let (lp, v) = actor.score(&tokens, tok);
                tokens.push(tok);
                mask.push(0);
                rewards.push(0.0);
                old_logprobs.push(lp);
                values.push(v);
            }
            segments.push(Segment {
                start: fb_start,
                len: outcome.feedback_tokens.len(),
                kind: TransitionKind::Environmental,
                is_prompt: false,
            });
        }

        if outcome.done {
            if outcome.outcome_reward != 0.0 {
                let last_action = mask
                    .iter()
                    .rposition(|&m| m == 1)
                    .expect("every episode has at least one action token");
                rewards[last_action] += outcome.outcome_reward;
            }
            break outcome.reason.expect("done steps carry a reason");
        }
    };

    debug_assert_eq!(
        compute_action_mask(&segments, tokens.len())?,
        mask,
        "mask must match the recorded segment layout"
    );

    let trajectory = Trajectory {
        tokens,
        mask,
        rewards,
        old_logprobs,
        values,
        terminated: true,
        reason,
    };
    trajectory.validate()?;
    let episode_reward = trajectory.total_reward();
    Ok(RolloutRecord {
        trajectory,
        episode_reward,
        instance_id,
        seed,
    })
}

/// G independent episodes on the same instance with seeds derived from
/// `base_seed`; the records share the instance id. Group estimators
/// (GRPO, RLOO, the REINFORCE++ baseline) consume these as one unit.
#[allow(clippy::too_many_arguments)]
pub fn rollout_group(
    params: &crate::policy::PolicyParams,
    instance: &crate::hopqa::Instance,
    task: &crate::hopqa::TaskVocab,
    registry: &crate::tool_protocol::ToolRegistry,
    limits: crate::tool_env::Limits,
    process: crate::tool_env::ProcessRewardConfig,
    top_k: usize,
    group_size: usize,
    decode: crate::policy::Decode,
    base_seed: u64,
) -> Result<Vec<RolloutRecord>, RolloutError> {
    let mut records = Vec::with_capacity(group_size);
    for i in 0..group_size {
        let ep_seed = derive_seed(base_seed, i as u64 + 1);
        let mut env = ToolEnv::new(
            instance,
            task,
            registry,
            limits,
            process,
            top_k,
            derive_seed(ep_seed, 0),
        );
        let mut actor =
            crate::policy::PolicyActor::new(params, decode, crate::hopqa::PAD, ep_seed);
        records.push(rollout_episode(&mut actor, &mut env, instance.seed, ep_seed)?);
    }
    Ok(records)
}

/// Replays a fixed token script; used by oracle walks and tests.
pub struct ScriptedActor {
    queue: std::collections::VecDeque<TokenId>,
}

impl ScriptedActor {
    pub fn from_turns(turns: &[Vec<TokenId>]) -> Self {
        Self {
            queue: turns.iter().flatten().copied().collect(),
        }
    }
}

impl Actor for ScriptedActor {
    fn next_token(&mut self, _tokens_so_far: &[TokenId]) -> Result<ActorChoice, PolicyError> {
        let token = self
            .queue
            .pop_front()
            .ok_or_else(|| PolicyError::Dimension("scripted actor ran out of tokens".into()))?;
        Ok(ActorChoice {
            token,
            logprob: 0.0,
            value: 0.0,
        })
    }
}
