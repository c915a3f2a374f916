//! Advantage estimation and policy-gradient losses with action masks.
//!
//! "Advantage mask enabled" condenses every recursion to the agent's
//! action positions, so environment tokens never enter the bootstrap;
//! disabling it runs the same recursion over all positions, which is the
//! ablation arm. "Loss mask enabled" restricts the surrogate objective to
//! action positions the same way.
//!
//! GRPO, RLOO, and the discounted-reward-to-go estimators use their
//! standard formulations; the clipped surrogate is shared by every
//! algorithm.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RlError {
    #[error("mask selects no positions")]
    EmptyMask,
    #[error("empty batch")]
    EmptyBatch,
    #[error("group methods need at least 2 rollouts, got {0}")]
    GroupSize(usize),
    #[error("input arrays differ in length")]
    LengthMismatch,
    #[error("non-finite input")]
    NonFinite,
    #[error("invalid config: {0}")]
    Config(String),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ppo,
    Grpo,
    ReinforcePp,
    ReinforcePpBaseline,
    Rloo,
}

impl Algorithm {
    pub fn uses_critic(self) -> bool {
        matches!(self, Algorithm::Ppo)
    }

    pub fn uses_groups(self) -> bool {
        matches!(
            self,
            Algorithm::Grpo | Algorithm::Rloo | Algorithm::ReinforcePpBaseline
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Ppo => "ppo",
            Algorithm::Grpo => "grpo",
            Algorithm::ReinforcePp => "reinforce_pp",
            Algorithm::ReinforcePpBaseline => "reinforce_pp_baseline",
            Algorithm::Rloo => "rloo",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = RlError;

    fn from_str(s: &str) -> Result<Self, RlError> {
        match s {
            "ppo" => Ok(Algorithm::Ppo),
            "grpo" => Ok(Algorithm::Grpo),
            "reinforce_pp" => Ok(Algorithm::ReinforcePp),
            "reinforce_pp_baseline" => Ok(Algorithm::ReinforcePpBaseline),
            "rloo" => Ok(Algorithm::Rloo),
            other => Err(RlError::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RlConfig {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub lambda: f64,
    pub clip_eps: f64,
    pub group_size: usize,
    pub norm_eps: f64,
    pub loss_mask_enabled: bool,
    pub advantage_mask_enabled: bool,
    /// Whiten advantages over action positions per batch (PPO and the
    /// reward-to-go estimators).
    pub whiten_advantages: bool,
    /// Hook for a KL penalty against the rollout policy; off by default.
    pub kl_coef: f64,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Ppo,
            gamma: 1.0,
            lambda: 0.95,
            clip_eps: 0.2,
            group_size: 8,
            norm_eps: 1e-8,
            loss_mask_enabled: true,
            advantage_mask_enabled: true,
            whiten_advantages: true,
            kl_coef: 0.0,
        }
    }
}

impl RlConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(RlError::Config("gamma must be in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(RlError::Config("lambda must be in [0, 1]".into()));
        }
        if !(self.clip_eps > 0.0) {
            return Err(RlError::Config("clip_eps must be positive".into()));
        }
        if self.algorithm.uses_groups() && self.group_size < 2 {
            return Err(RlError::GroupSize(self.group_size));
        }
        Ok(())
    }
}

fn check_finite(slices: &[&[f64]]) -> Result<(), RlError> {
    for s in slices {
        if s.iter().any(|v| !v.is_finite()) {
            return Err(RlError::NonFinite);
        }
    }
    Ok(())
}

fn positions(mask: &[u8], condense: bool) -> Vec<usize> {
    if condense {
        mask.iter()
            .enumerate()
            .filter(|(_, &m)| m == 1)
            .map(|(i, _)| i)
            .collect()
    } else {
        (0..mask.len()).collect()
    }
}

/// GAE over the (condensed) position subsequence, scattered back to those
/// positions. Returns `(advantages, returns)` with `returns = A + V` at
/// the included positions and zero elsewhere.
pub fn masked_gae(
    rewards: &[f64],
    values: &[f64],
    mask: &[u8],
    gamma: f64,
    lambda: f64,
    advantage_mask_enabled: bool,
) -> Result<(Vec<f64>, Vec<f64>), RlError> {
    let n = rewards.len();
    if values.len() != n || mask.len() != n {
        return Err(RlError::LengthMismatch);
    }
    check_finite(&[rewards, values])?;
    if !mask.contains(&1) {
        return Err(RlError::EmptyMask);
    }
    let idx = positions(mask, advantage_mask_enabled);
    let m = idx.len();
    let mut adv = vec![0.0; n];
    let mut returns = vec![0.0; n];
    let mut acc = 0.0;
    for j in (0..m).rev() {
        let i = idx[j];
        let v_next = if j + 1 < m { values[idx[j + 1]] } else { 0.0 };
        let delta = rewards[i] + gamma * v_next - values[i];
        acc = delta + gamma * lambda * acc;
        adv[i] = acc;
        returns[i] = acc + values[i];
    }
    Ok((adv, returns))
}

/// Population mean/std whitening with the small-eps guard.
pub fn whiten(xs: &mut [f64], indices: &[usize], norm_eps: f64) {
    if indices.is_empty() {
        return;
    }
    let n = indices.len() as f64;
    let mean = indices.iter().map(|&i| xs[i]).sum::<f64>() / n;
    let var = indices.iter().map(|&i| (xs[i] - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for &i in indices {
        xs[i] = (xs[i] - mean) / (std + norm_eps);
    }
}

/// Group-standardized scalar advantages: `(r - mean) / (std + eps)`.
pub fn grpo_advantages(group_rewards: &[f64], norm_eps: f64) -> Result<Vec<f64>, RlError> {
    let g = group_rewards.len();
    if g < 2 {
        return Err(RlError::GroupSize(g));
    }
    check_finite(&[group_rewards])?;
    let mut out = group_rewards.to_vec();
    let idx: Vec<usize> = (0..g).collect();
    whiten(&mut out, &idx, norm_eps);
    Ok(out)
}

/// Leave-one-out baseline: `A_i = r_i - mean of the other rewards`.
pub fn rloo_advantages(group_rewards: &[f64]) -> Result<Vec<f64>, RlError> {
    let g = group_rewards.len();
    if g < 2 {
        return Err(RlError::GroupSize(g));
    }
    check_finite(&[group_rewards])?;
    let total: f64 = group_rewards.iter().sum();
    Ok(group_rewards
        .iter()
        .map(|&r| r - (total - r) / (g as f64 - 1.0))
        .collect())
}

/// Per-action-token discounted reward-to-go, optionally centered by the
/// trajectory's group mean total reward, optionally whitened across the
/// batch's included positions.
#[allow(clippy::too_many_arguments)]
pub fn reinforce_pp_advantages(
    rewards: &[Vec<f64>],
    masks: &[Vec<u8>],
    group_ids: &[usize],
    gamma: f64,
    use_group_baseline: bool,
    advantage_mask_enabled: bool,
    norm_eps: f64,
    apply_whitening: bool,
) -> Result<Vec<Vec<f64>>, RlError> {
    let b = rewards.len();
    if b == 0 {
        return Err(RlError::EmptyBatch);
    }
    if masks.len() != b || group_ids.len() != b {
        return Err(RlError::LengthMismatch);
    }

    let baselines: Vec<f64> = if use_group_baseline {
        let n_groups = group_ids.iter().max().unwrap() + 1;
        let mut sum = vec![0.0; n_groups];
        let mut count = vec![0usize; n_groups];
        for (t, &g) in group_ids.iter().enumerate() {
            sum[g] += rewards[t].iter().sum::<f64>();
            count[g] += 1;
        }
        group_ids
            .iter()
            .map(|&g| sum[g] / count[g].max(1) as f64)
            .collect()
    } else {
        vec![0.0; b]
    };

    let mut out = Vec::with_capacity(b);
    for t in 0..b {
        if rewards[t].len() != masks[t].len() {
            return Err(RlError::LengthMismatch);
        }
        check_finite(&[&rewards[t]])?;
        let idx = positions(&masks[t], advantage_mask_enabled);
        let mut adv = vec![0.0; rewards[t].len()];
        let mut acc = 0.0;
        for &i in idx.iter().rev() {
            acc = rewards[t][i] + gamma * acc;
            adv[i] = acc - baselines[t];
        }
        out.push(adv);
    }

    if apply_whitening {
        let mut flat = Vec::new();
        for (t, m) in masks.iter().enumerate() {
            for i in positions(m, advantage_mask_enabled) {
                flat.push((t, i));
            }
        }
        let mut vals: Vec<f64> = flat.iter().map(|&(t, i)| out[t][i]).collect();
        let idx: Vec<usize> = (0..vals.len()).collect();
        whiten(&mut vals, &idx, norm_eps);
        for (&(t, i), v) in flat.iter().zip(&vals) {
            out[t][i] = *v;
        }
    }
    Ok(out)
}

/// One scalar advantage per trajectory, placed at the included positions.
pub fn broadcast_scalar_advantage(
    mask: &[u8],
    scalar: f64,
    advantage_mask_enabled: bool,
) -> Vec<f64> {
    mask.iter()
        .map(|&m| {
            if !advantage_mask_enabled || m == 1 {
                scalar
            } else {
                0.0
            }
        })
        .collect()
}

/// Clipped surrogate objective over the included positions. Returns the
/// scalar loss and the per-token gradient with respect to the new
/// log-probabilities; the gradient is exactly zero at excluded positions.
pub fn actor_loss(
    old_logprobs: &[f64],
    new_logprobs: &[f64],
    advantages: &[f64],
    mask: &[u8],
    clip_eps: f64,
    loss_mask_enabled: bool,
) -> Result<(f64, Vec<f64>), RlError> {
    let n = old_logprobs.len();
    if new_logprobs.len() != n || advantages.len() != n || mask.len() != n {
        return Err(RlError::LengthMismatch);
    }
    let idx = positions(mask, loss_mask_enabled);
    if idx.is_empty() {
        return Err(RlError::EmptyMask);
    }
    for &i in &idx {
        if ![old_logprobs[i], new_logprobs[i], advantages[i]]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(RlError::NonFinite);
        }
    }
    let count = idx.len() as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; n];
    for &i in &idx {
        let ratio = (new_logprobs[i] - old_logprobs[i]).exp();
        let a = advantages[i];
        let unclipped = ratio * a;
        let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * a;
        if unclipped <= clipped {
            total += unclipped;
            // d(ratio * A)/d new_logprob = ratio * A
            grad[i] = -(ratio * a) / count;
        } else {
            total += clipped;
            // min picked the clipped branch with the clamp binding
            grad[i] = 0.0;
        }
    }
    Ok((-total / count, grad))
}

/// Mean squared error between new values and returns at action positions.
pub fn critic_loss(
    values_new: &[f64],
    returns: &[f64],
    mask: &[u8],
) -> Result<(f64, Vec<f64>), RlError> {
    let n = values_new.len();
    if returns.len() != n || mask.len() != n {
        return Err(RlError::LengthMismatch);
    }
    let idx = positions(mask, true);
    if idx.is_empty() {
        return Err(RlError::EmptyMask);
    }
    let count = idx.len() as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; n];
    for &i in &idx {
        let diff = values_new[i] - returns[i];
        if !diff.is_finite() {
            return Err(RlError::NonFinite);
        }
        total += diff * diff;
        grad[i] = 2.0 * diff / count;
    }
    Ok((total / count, grad))
}
