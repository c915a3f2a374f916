//! Environment orchestration: consume one turn of agent output, run the
//! tool, produce feedback tokens, compute rewards, and decide termination.
//!
//! Tool *execution* failures come back as empty observations so the agent
//! can recover; tool *parse* failures end the episode with the format
//! penalty already folded into the outcome reward.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hopqa::{answer_spans, outcome_reward, search_tool, Instance, TaskVocab};
use crate::token_mdp::TerminationReason;
use crate::tool_protocol::{
    detect_tool_call_trigger, extract_tool_calls, format_tool_response, ToolCall, ToolRegistry,
    ToolResult,
};
use crate::vocab::TokenId;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
}

/// Episode budgets. Defaults leave 2-hop tasks solvable with slack.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub max_turns: usize,
    pub max_tokens_per_turn: usize,
    pub max_total_tokens: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_turns: 4,
            max_tokens_per_turn: 16,
            max_total_tokens: 96,
        }
    }
}

/// Process-reward knob. Disabled by default: the task reward is a sparse
/// final outcome unless intermediate shaping is switched on.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProcessRewardConfig {
    pub enabled: bool,
    pub rho: f64,
}

impl Default for ProcessRewardConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            rho: 0.1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepInfo {
    pub parse_ok: bool,
    pub tool_executed: bool,
    pub calls_ignored: usize,
}

/// Result of one environment step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub feedback_tokens: Vec<TokenId>,
    pub process_reward: f64,
    pub outcome_reward: f64,
    pub done: bool,
    pub reason: Option<TerminationReason>,
    pub info: StepInfo,
}

/// Per-episode environment state over one task instance.
pub struct ToolEnv<'a> {
    instance: &'a Instance,
    task: &'a TaskVocab,
    registry: &'a ToolRegistry,
    limits: Limits,
    process: ProcessRewardConfig,
    top_k: usize,
    #[allow(dead_code)] // seeded source for stochastic tool backends
    rng: ChaCha8Rng,
    turn_count: usize,
    total_tokens: usize,
    done: bool,
    transcript_tokens: Vec<TokenId>,
    transcript_mask: Vec<u8>,
}

impl<'a> ToolEnv<'a> {
    pub fn new(
        instance: &'a Instance,
        task: &'a TaskVocab,
        registry: &'a ToolRegistry,
        limits: Limits,
        process: ProcessRewardConfig,
        top_k: usize,
        seed: u64,
    ) -> Self {
        let prompt = instance.question_tokens.clone();
        let prompt_len = prompt.len();
        Self {
            instance,
            task,
            registry,
            limits,
            process,
            top_k,
            rng: ChaCha8Rng::seed_from_u64(seed),
            turn_count: 0,
            total_tokens: 0,
            done: false,
            transcript_tokens: prompt,
            transcript_mask: vec![0; prompt_len],
        }
    }

    pub fn prompt(&self) -> &[TokenId] {
        &self.instance.question_tokens
    }

    pub fn vocab(&self) -> &crate::vocab::Vocabulary {
        self.task.vocab()
    }

    pub fn limits(&self) -> Limits {
        self.limits
    }

    pub fn done(&self) -> bool {
        self.done
    }

    pub fn turn_count(&self) -> usize {
        self.turn_count
    }

    /// Generated tokens so far (agent plus feedback, prompt excluded).
    pub fn total_tokens(&self) -> usize {
        self.total_tokens
    }

    pub fn gold_answer(&self) -> TokenId {
        self.instance.gold_answer
    }

    /// Termination check on the upcoming turn's output. Answer spans and
    /// EOS dominate; budget limits are checked after.
    pub fn should_stop(&self, agent_output: &[TokenId]) -> Option<TerminationReason> {
        if !answer_spans(agent_output).is_empty() {
            return Some(TerminationReason::AnswerEmitted);
        }
        if agent_output.contains(&crate::hopqa::EOS) {
            return Some(TerminationReason::Eos);
        }
        if self.turn_count + 1 >= self.limits.max_turns {
            return Some(TerminationReason::MaxTurns);
        }
        if self.total_tokens + agent_output.len() >= self.limits.max_total_tokens {
            return Some(TerminationReason::MaxTokens);
        }
        None
    }

    /// Intermediate reward for a tool-call turn: `rho` when enabled and the
    /// call parsed and returned at least one fact, otherwise zero.
    pub fn process_reward(&self, call: Result<&ToolCall, ()>, result: &ToolResult) -> f64 {
        if self.process.enabled && call.is_ok() && result.success && !result.payload.is_empty() {
            self.process.rho
        } else {
            0.0
        }
    }

    fn finish(&mut self, reason: TerminationReason) -> (f64, TerminationReason) {
        self.done = true;
        let r = outcome_reward(
            &self.transcript_tokens,
            &self.transcript_mask,
            self.instance.gold_answer,
            self.task.vocab(),
            self.registry,
        );
        (r, reason)
    }

    /// Consume one turn of agent output and advance the episode.
    pub fn step(&mut self, agent_output: &[TokenId]) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::ProtocolViolation("step after done".into()));
        }
        if agent_output.is_empty() {
            return Err(EnvError::ProtocolViolation("empty agent output".into()));
        }

        let limit_reason = {
            // budget state *before* counters advance, as seen by should_stop
            let r = self.should_stop(agent_output);
            matches!(
                r,
                Some(TerminationReason::MaxTurns) | Some(TerminationReason::MaxTokens)
            )
            .then(|| r.unwrap())
        };

        self.transcript_tokens.extend_from_slice(agent_output);
        self.transcript_mask.extend(vec![1u8; agent_output.len()]);
        self.turn_count += 1;
        self.total_tokens += agent_output.len();

        let mut info = StepInfo {
            parse_ok: true,
            tool_executed: false,
            calls_ignored: 0,
        };

        // (a) a finished answer span ends the episode
        if !answer_spans(agent_output).is_empty() {
            let (r, reason) = self.finish(TerminationReason::AnswerEmitted);
            return Ok(StepOutcome {
                feedback_tokens: Vec::new(),
                process_reward: 0.0,
                outcome_reward: r,
                done: true,
                reason: Some(reason),
                info,
            });
        }

        // (b) tool turn: any tool markers mean the turn must parse
        let has_markers = agent_output.contains(&crate::hopqa::TOOL_OPEN)
            || agent_output.contains(&crate::hopqa::TOOL_CLOSE);
        if has_markers {
            match extract_tool_calls(agent_output, self.task.vocab(), self.registry) {
                Ok(calls) if !calls.is_empty() => {
                    debug_assert!(
                        detect_tool_call_trigger(agent_output, self.task.vocab()).is_some()
                    );
                    info.calls_ignored = calls.len() - 1;
                    let call = &calls[0];
                    let result =
                        search_tool(&self.instance.kb, self.task, &call.arguments, self.top_k);
                    info.tool_executed = true;
                    let feedback = format_tool_response(&result, self.task.vocab())
                        .expect("kb facts are in-vocabulary");
                    self.transcript_tokens.extend_from_slice(&feedback);
                    self.transcript_mask.extend(vec![0u8; feedback.len()]);
                    self.total_tokens += feedback.len();
                    let process_reward = self.process_reward(Ok(call), &result);
                    let (outcome, reason) = match limit_reason {
                        Some(r) => {
                            let (out, r) = self.finish(r);
                            (out, Some(r))
                        }
                        None => (0.0, None),
                    };
                    return Ok(StepOutcome {
                        feedback_tokens: feedback,
                        process_reward,
                        outcome_reward: outcome,
                        done: self.done,
                        reason,
                        info,
                    });
                }
                Ok(_) => unreachable!("marker-bearing turn parses to calls or an error"),
                Err(_) => {
                    info.parse_ok = false;
                    let (r, reason) = self.finish(TerminationReason::ParseFailure);
                    return Ok(StepOutcome {
                        feedback_tokens: Vec::new(),
                        process_reward: 0.0,
                        outcome_reward: r,
                        done: true,
                        reason: Some(reason),
                        info,
                    });
                }
            }
        }

        // (c) plain turn: stop on EOS or budget, otherwise continue
        let stop = if agent_output.contains(&crate::hopqa::EOS) {
            Some(TerminationReason::Eos)
        } else {
            limit_reason
        };
        match stop {
            Some(reason) => {
                let (r, reason) = self.finish(reason);
                Ok(StepOutcome {
                    feedback_tokens: Vec::new(),
                    process_reward: 0.0,
                    outcome_reward: r,
                    done: true,
                    reason: Some(reason),
                    info,
                })
            }
            None => Ok(StepOutcome {
                feedback_tokens: Vec::new(),
                process_reward: 0.0,
                outcome_reward: 0.0,
                done: false,
                reason: None,
                info,
            }),
        }
    }
}
