//! States, turns, and trajectories of the extended token-level MDP.
//!
//! A state is the prompt, a list of completed interaction turns (agent
//! actions plus environment feedback), and the partial current turn.
//! Appending an agent token is a deterministic generative transition;
//! closing a turn with feedback is an environmental transition. All values
//! are immutable after construction and the operations are pure, so states
//! can be shared freely across rollout workers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vocab::{TokenId, Vocabulary};

#[derive(Debug, Error, PartialEq)]
pub enum MdpError {
    #[error("token index {token} out of range for vocabulary of size {vocab_size}")]
    InvalidToken { token: u32, vocab_size: usize },
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("layout error: {0}")]
    LayoutError(String),
}

/// Which transition produced a segment of tokens.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum TransitionKind {
    Generative,
    Environmental,
}

/// One completed interaction turn: agent actions plus environment feedback.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Turn {
    pub action_tokens: Vec<TokenId>,
    pub feedback_tokens: Vec<TokenId>,
}

/// Prompt, completed turns, and the in-progress agent generation.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct AgentState {
    pub prompt: Vec<TokenId>,
    pub completed_turns: Vec<Turn>,
    pub partial: Vec<TokenId>,
}

impl AgentState {
    pub fn from_prompt(prompt: Vec<TokenId>) -> Self {
        Self {
            prompt,
            completed_turns: Vec::new(),
            partial: Vec::new(),
        }
    }
}

/// Generative transition: append one agent-sampled token to the partial turn.
pub fn append_action_token(
    state: &AgentState,
    token: TokenId,
    vocab: &Vocabulary,
) -> Result<AgentState, MdpError> {
    if !vocab.contains(token) {
        return Err(MdpError::InvalidToken {
            token: token.0,
            vocab_size: vocab.size(),
        });
    }
    let mut next = state.clone();
    next.partial.push(token);
    Ok(next)
}

/// Environmental transition: close the partial turn with feedback tokens
/// (possibly empty, for non-tool final turns) and start a fresh turn.
pub fn append_environment_feedback(
    state: &AgentState,
    feedback: Vec<TokenId>,
) -> Result<AgentState, MdpError> {
    if state.partial.is_empty() {
        return Err(MdpError::ProtocolViolation(
            "cannot attach feedback before any action tokens".into(),
        ));
    }
    let mut next = state.clone();
    let actions = std::mem::take(&mut next.partial);
    next.completed_turns.push(Turn {
        action_tokens: actions,
        feedback_tokens: feedback,
    });
    Ok(next)
}

/// Canonical flattening: prompt, then each turn's actions and feedback in
/// order, then the partial turn.
pub fn flatten(state: &AgentState) -> Vec<TokenId> {
    let mut out = state.prompt.clone();
    for turn in &state.completed_turns {
        out.extend_from_slice(&turn.action_tokens);
        out.extend_from_slice(&turn.feedback_tokens);
    }
    out.extend_from_slice(&state.partial);
    out
}

/// One segment of a trajectory layout: `[start, start+len)` produced by the
/// given transition kind. Prompt segments are environmental for masking.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
    pub kind: TransitionKind,
    pub is_prompt: bool,
}

/// Mask with 1 exactly on agent-generated segments. Segments must tile
/// `total_len` without gaps or overlap.
pub fn compute_action_mask(segments: &[Segment], total_len: usize) -> Result<Vec<u8>, MdpError> {
    let mut cursor = 0usize;
    let mut mask = Vec::with_capacity(total_len);
    for seg in segments {
        if seg.start != cursor {
            return Err(MdpError::LayoutError(format!(
                "segment starts at {} but previous segment ends at {}",
                seg.start, cursor
            )));
        }
        let bit = if seg.is_prompt {
            0
        } else {
            match seg.kind {
                TransitionKind::Generative => 1,
                TransitionKind::Environmental => 0,
            }
        };
        mask.extend(std::iter::repeat(bit).take(seg.len));
        cursor += seg.len;
    }
    if cursor != total_len {
        return Err(MdpError::LayoutError(format!(
            "segments cover {cursor} tokens but sequence has {total_len}"
        )));
    }
    Ok(mask)
}

/// Why an episode ended.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    AnswerEmitted,
    Eos,
    MaxTurns,
    MaxTokens,
    ParseFailure,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::AnswerEmitted => "answer_emitted",
            TerminationReason::Eos => "eos",
            TerminationReason::MaxTurns => "max_turns",
            TerminationReason::MaxTokens => "max_tokens",
            TerminationReason::ParseFailure => "parse_failure",
        }
    }
}

/// Flat token sequence with parallel per-token annotations; the unit of
/// learning. Rewards are nonzero only at mask=1 positions.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub tokens: Vec<TokenId>,
    pub mask: Vec<u8>,
    pub rewards: Vec<f64>,
    pub old_logprobs: Vec<f64>,
    pub values: Vec<f64>,
    pub terminated: bool,
    pub reason: TerminationReason,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn validate(&self) -> Result<(), MdpError> {
        let n = self.tokens.len();
        if [
            self.mask.len(),
            self.rewards.len(),
            self.old_logprobs.len(),
            self.values.len(),
        ]
        .iter()
        .any(|&l| l != n)
        {
            return Err(MdpError::LayoutError(
                "parallel trajectory arrays differ in length".into(),
            ));
        }
        for i in 0..n {
            if self.mask[i] == 0 && self.rewards[i] != 0.0 {
                return Err(MdpError::LayoutError(format!(
                    "nonzero reward at masked-out position {i}"
                )));
            }
        }
        Ok(())
    }

    /// One JSON record per trajectory, tokens rendered as symbol strings.
    pub fn dump_line(&self, vocab: &Vocabulary) -> String {
        let record = TrajectoryRecord {
            tokens: vocab.decode(&self.tokens),
            mask: self.mask.clone(),
            rewards: self.rewards.clone(),
            old_logprobs: self.old_logprobs.clone(),
            values: self.values.clone(),
            terminated: self.terminated,
            reason: self.reason,
        };
        serde_json::to_string(&record).expect("trajectory record serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRecord {
    tokens: Vec<String>,
    mask: Vec<u8>,
    rewards: Vec<f64>,
    old_logprobs: Vec<f64>,
    values: Vec<f64>,
    terminated: bool,
    reason: TerminationReason,
}
