//! Desk-scale reinforcement learning for multi-turn, tool-using token
//! agents.
//!
//! The crate models agent/environment interaction as a token-level MDP:
//! the agent emits tokens, certain token spans are tool calls, and the
//! environment splices tool observations back into the sequence. An
//! action mask separates agent-generated tokens from prompt and feedback,
//! and the learning stage (GAE, group estimators, clipped surrogate loss)
//! is aligned to that mask. A synthetic multi-hop retrieval task plus a
//! tiny from-scratch actor-critic make the whole loop runnable in
//! seconds on a laptop.
//!
//! See the `examples/` directory for one runnable walkthrough per major
//! capability, and the `tokenagent` binary for the batch train/eval/ablate
//! surface.

pub mod hopqa;
pub mod plot;
pub mod policy;
pub mod rl;
pub mod rollout;
pub mod token_mdp;
pub mod tool_env;
pub mod tool_protocol;
pub mod trainer;
pub mod vocab;

pub use vocab::{TokenId, Vocabulary};
