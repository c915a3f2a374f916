//! Tiny from-scratch autoregressive actor-critic.
//!
//! A fixed window of the last `w` tokens is embedded (token + position
//! embeddings), flattened, pushed through one tanh hidden layer, and read
//! out by a logit head and a value head. Parameters live in one flat
//! vector so gradient checks, clipping, and updates are uniform over every
//! block. The critic can share the trunk (default) or own a separate one.
//!
//! forward/logprob/sample are read-only on the parameters; updates are
//! single-writer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vocab::TokenId;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("token index {0} out of range")]
    InvalidToken(u32),
    #[error("numerical error: {0}")]
    Numerical(String),
}

/// Architecture sizes. `window * embed` is the flattened context width.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub vocab_size: usize,
    pub window: usize,
    pub embed: usize,
    pub hidden: usize,
    /// When set, the value head reads a separate tanh trunk instead of
    /// sharing the actor's.
    pub separate_critic: bool,
}

impl Dims {
    fn check(&self) -> Result<(), PolicyError> {
        if self.vocab_size == 0 || self.window == 0 || self.embed == 0 || self.hidden == 0 {
            return Err(PolicyError::Dimension(format!("degenerate dims {self:?}")));
        }
        Ok(())
    }

    fn ctx_width(&self) -> usize {
        self.window * self.embed
    }

    pub fn param_count(&self) -> usize {
        let shared = self.vocab_size * self.embed            // token embedding
            + self.window * self.embed                       // position embedding
            + self.hidden * self.ctx_width() + self.hidden   // actor trunk
            + self.vocab_size * self.hidden + self.vocab_size // logit head
            + self.hidden + 1; // value head
        if self.separate_critic {
            shared + self.hidden * self.ctx_width() + self.hidden
        } else {
            shared
        }
    }
}

/// Offsets of each parameter block in the flat vector.
#[derive(Copy, Clone, Debug)]
struct Layout {
    tok_emb: usize,
    pos_emb: usize,
    w1: usize,
    b1: usize,
    w_logit: usize,
    b_logit: usize,
    w_value: usize,
    b_value: usize,
    w1_critic: usize,
    b1_critic: usize,
}

impl Layout {
    fn new(d: &Dims) -> Self {
        let tok_emb = 0;
        let pos_emb = tok_emb + d.vocab_size * d.embed;
        let w1 = pos_emb + d.window * d.embed;
        let b1 = w1 + d.hidden * d.ctx_width();
        let w_logit = b1 + d.hidden;
        let b_logit = w_logit + d.vocab_size * d.hidden;
        let w_value = b_logit + d.vocab_size;
        let b_value = w_value + d.hidden;
        let w1_critic = b_value + 1;
        let b1_critic = w1_critic + d.hidden * d.ctx_width();
        Self {
            tok_emb,
            pos_emb,
            w1,
            b1,
            w_logit,
            b_logit,
            w_value,
            b_value,
            w1_critic,
            b1_critic,
        }
    }
}

/// All model parameters as one flat vector plus its layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub dims: Dims,
    pub theta: Vec<f64>,
}

/// Logits over the vocabulary plus the scalar value estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput {
    pub logits: Vec<f64>,
    pub value: f64,
}

/// One backward sample: the context, the realized token, and the upstream
/// gradients flowing into its log-probability and value.
#[derive(Clone, Debug)]
pub struct BackwardSample {
    pub context: Vec<TokenId>,
    pub token: TokenId,
    pub d_logprob: f64,
    pub d_value: f64,
}

/// Entries drawn uniformly from (-0.08, 0.08); deterministic per seed.
pub fn init_params(seed: u64, dims: Dims) -> Result<PolicyParams, PolicyError> {
    dims.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = (0..dims.param_count())
        .map(|_| rng.gen_range(-0.08..0.08))
        .collect();
    Ok(PolicyParams { dims, theta })
}

pub fn zero_params(dims: Dims) -> Result<PolicyParams, PolicyError> {
    dims.check()?;
    Ok(PolicyParams {
        theta: vec![0.0; dims.param_count()],
        dims,
    })
}

/// Last `window` tokens of `tokens[..upto]`, left-padded with `pad`.
pub fn context_window(tokens: &[TokenId], upto: usize, window: usize, pad: TokenId) -> Vec<TokenId> {
    let prefix = &tokens[..upto.min(tokens.len())];
    let take = prefix.len().min(window);
    let mut ctx = vec![pad; window - take];
    ctx.extend_from_slice(&prefix[prefix.len() - take..]);
    ctx
}

struct ForwardTrace {
    x: Vec<f64>,
    h_act: Vec<f64>,
    h_act_critic: Vec<f64>,
    logits: Vec<f64>,
    value: f64,
}

fn run_forward(params: &PolicyParams, context: &[TokenId]) -> Result<ForwardTrace, PolicyError> {
    let d = &params.dims;
    if context.len() != d.window {
        return Err(PolicyError::Dimension(format!(
            "context length {} != window {}",
            context.len(),
            d.window
        )));
    }
    for t in context {
        if t.index() >= d.vocab_size {
            return Err(PolicyError::InvalidToken(t.0));
        }
    }
    let l = Layout::new(d);
    let th = &params.theta;

    let mut x = vec![0.0; d.ctx_width()];
    for (j, tok) in context.iter().enumerate() {
        let te = l.tok_emb + tok.index() * d.embed;
        let pe = l.pos_emb + j * d.embed;
        for k in 0..d.embed {
            x[j * d.embed + k] = th[te + k] + th[pe + k];
        }
    }

    let trunk = |w_off: usize, b_off: usize| -> Vec<f64> {
        let mut h = vec![0.0; d.hidden];
        for i in 0..d.hidden {
            let row = w_off + i * d.ctx_width();
            let mut acc = th[b_off + i];
            for (k, xv) in x.iter().enumerate() {
                acc += th[row + k] * xv;
            }
            h[i] = acc.tanh();
        }
        h
    };

    let h_act = trunk(l.w1, l.b1);
    let h_act_critic = if d.separate_critic {
        trunk(l.w1_critic, l.b1_critic)
    } else {
        h_act.clone()
    };

    let mut logits = vec![0.0; d.vocab_size];
    for i in 0..d.vocab_size {
        let row = l.w_logit + i * d.hidden;
        let mut acc = th[l.b_logit + i];
        for (j, hv) in h_act.iter().enumerate() {
            acc += th[row + j] * hv;
        }
        logits[i] = acc;
    }
    let mut value = th[l.b_value];
    for (j, hv) in h_act_critic.iter().enumerate() {
        value += th[l.w_value + j] * hv;
    }

    Ok(ForwardTrace {
        x,
        h_act,
        h_act_critic,
        logits,
        value,
    })
}

/// Deterministic logits and value for a padded context window.
pub fn forward(params: &PolicyParams, context: &[TokenId]) -> Result<PolicyOutput, PolicyError> {
    let t = run_forward(params, context)?;
    Ok(PolicyOutput {
        logits: t.logits,
        value: t.value,
    })
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_z = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|l| l - log_z).collect()
}

/// Numerically stabilized log softmax of one token.
pub fn logprob(logits: &[f64], token: TokenId) -> f64 {
    log_softmax(logits)[token.index()]
}

/// Draw from softmax(logits / temperature).
pub fn sample_token<R: Rng>(
    logits: &[f64],
    temperature: f64,
    rng: &mut R,
) -> Result<TokenId, PolicyError> {
    if !(temperature > 0.0) {
        return Err(PolicyError::Dimension(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(PolicyError::Numerical("non-finite logits".into()));
    }
    let scaled: Vec<f64> = logits.iter().map(|l| l / temperature).collect();
    let logp = log_softmax(&scaled);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, lp) in logp.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return Ok(TokenId(i as u32));
        }
    }
    Ok(TokenId((logits.len() - 1) as u32))
}

/// Argmax with lowest-index tie-break; the temperature→0 decode rule.
pub fn greedy_token(logits: &[f64]) -> TokenId {
    let mut best = 0usize;
    for (i, l) in logits.iter().enumerate() {
        if *l > logits[best] {
            best = i;
        }
    }
    TokenId(best as u32)
}

/// Exact reverse-mode gradient of the forward computation for a minibatch,
/// seeded by upstream dL/dlogprob and dL/dvalue per sample.
pub fn backward(
    params: &PolicyParams,
    batch: &[BackwardSample],
) -> Result<Vec<f64>, PolicyError> {
    let d = &params.dims;
    let l = Layout::new(d);
    let th = &params.theta;
    let mut grad = vec![0.0; params.theta.len()];

    for sample in batch {
        if !sample.d_logprob.is_finite() || !sample.d_value.is_finite() {
            return Err(PolicyError::Numerical("non-finite upstream gradient".into()));
        }
        if sample.token.index() >= d.vocab_size {
            return Err(PolicyError::InvalidToken(sample.token.0));
        }
        if sample.d_logprob == 0.0 && sample.d_value == 0.0 {
            continue;
        }
        let t = run_forward(params, &sample.context)?;
        let logp = log_softmax(&t.logits);

        // d logprob(token) / d logits = onehot - softmax
        let mut d_logits = vec![0.0; d.vocab_size];
        if sample.d_logprob != 0.0 {
            for i in 0..d.vocab_size {
                let p = logp[i].exp();
                d_logits[i] = sample.d_logprob * (f64::from(i == sample.token.index()) - p);
            }
        }

        let mut dh_actor = vec![0.0; d.hidden];
        for i in 0..d.vocab_size {
            let g = d_logits[i];
            if g == 0.0 {
                continue;
            }
            let row = l.w_logit + i * d.hidden;
            grad[l.b_logit + i] += g;
            for j in 0..d.hidden {
                grad[row + j] += g * t.h_act[j];
                dh_actor[j] += g * th[row + j];
            }
        }

        let mut dh_critic = vec![0.0; d.hidden];
        if sample.d_value != 0.0 {
            grad[l.b_value] += sample.d_value;
            for j in 0..d.hidden {
                grad[l.w_value + j] += sample.d_value * t.h_act_critic[j];
                dh_critic[j] += sample.d_value * th[l.w_value + j];
            }
        }

        let mut dx = vec![0.0; d.ctx_width()];
        let backprop_trunk =
            |dh: &[f64], h_act: &[f64], w_off: usize, b_off: usize, grad: &mut [f64], dx: &mut [f64]| {
                for i in 0..d.hidden {
                    let dpre = dh[i] * (1.0 - h_act[i] * h_act[i]);
                    if dpre == 0.0 {
                        continue;
                    }
                    let row = w_off + i * d.ctx_width();
                    grad[b_off + i] += dpre;
                    for k in 0..d.ctx_width() {
                        grad[row + k] += dpre * t.x[k];
                        dx[k] += dpre * th[row + k];
                    }
                }
            };

        if d.separate_critic {
            backprop_trunk(&dh_actor, &t.h_act, l.w1, l.b1, &mut grad, &mut dx);
            backprop_trunk(
                &dh_critic,
                &t.h_act_critic,
                l.w1_critic,
                l.b1_critic,
                &mut grad,
                &mut dx,
            );
        } else {
            let dh: Vec<f64> = dh_actor
                .iter()
                .zip(&dh_critic)
                .map(|(a, c)| a + c)
                .collect();
            backprop_trunk(&dh, &t.h_act, l.w1, l.b1, &mut grad, &mut dx);
        }

        for (j, tok) in sample.context.iter().enumerate() {
            let te = l.tok_emb + tok.index() * d.embed;
            let pe = l.pos_emb + j * d.embed;
            for k in 0..d.embed {
                grad[te + k] += dx[j * d.embed + k];
                grad[pe + k] += dx[j * d.embed + k];
            }
        }
    }
    Ok(grad)
}

/// Plain gradient-descent step with global-norm clipping.
pub fn apply_gradient(
    params: &mut PolicyParams,
    grad: &[f64],
    learning_rate: f64,
    clip_norm: f64,
) -> Result<(), PolicyError> {
    if grad.len() != params.theta.len() {
        return Err(PolicyError::Dimension(format!(
            "gradient length {} != parameter count {}",
            grad.len(),
            params.theta.len()
        )));
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err(PolicyError::Numerical("non-finite gradient norm".into()));
    }
    let scale = if clip_norm > 0.0 && norm > clip_norm {
        clip_norm / norm
    } else {
        1.0
    };
    for (t, g) in params.theta.iter_mut().zip(grad) {
        *t -= learning_rate * scale * g;
    }
    Ok(())
}

/// Versioned checkpoint: header plus the flat parameter vector.
#[derive(Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub dims: Dims,
    pub seed: u64,
    pub step: u64,
    pub theta: Vec<f64>,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn new(params: &PolicyParams, seed: u64, step: u64) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            dims: params.dims,
            seed,
            step,
            theta: params.theta.clone(),
        }
    }

    pub fn into_params(self) -> Result<PolicyParams, PolicyError> {
        if self.theta.len() != self.dims.param_count() {
            return Err(PolicyError::Dimension(
                "checkpoint parameter count does not match header dims".into(),
            ));
        }
        Ok(PolicyParams {
            dims: self.dims,
            theta: self.theta,
        })
    }
}

/// How a rollout turns logits into tokens.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Decode {
    Greedy,
    Sample { temperature: f64 },
}

/// One sampled step of an acting policy.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorChoice {
    pub token: TokenId,
    pub logprob: f64,
    pub value: f64,
}

/// Anything that can drive an episode token by token. `tokens_so_far` is
/// the full flattened sequence including the prompt; the actor decides how
/// much of it to look at.
pub trait Actor {
    fn next_token(&mut self, tokens_so_far: &[TokenId]) -> Result<ActorChoice, PolicyError>;

    /// Log-probability and value the actor assigns to a given token it did
    /// not choose (prompt and environment positions). Zero for actors
    /// without a model.
    fn score(&self, _tokens_so_far: &[TokenId], _token: TokenId) -> (f64, f64) {
        (0.0, 0.0)
    }
}

/// The learned policy as an actor, with its own decode rng.
pub struct PolicyActor<'a> {
    pub params: &'a PolicyParams,
    pub decode: Decode,
    pub pad: TokenId,
    pub rng: ChaCha8Rng,
}

impl<'a> PolicyActor<'a> {
    pub fn new(params: &'a PolicyParams, decode: Decode, pad: TokenId, seed: u64) -> Self {
        Self {
            params,
            decode,
            pad,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn window(&self, tokens_so_far: &[TokenId]) -> Vec<TokenId> {
        context_window(
            tokens_so_far,
            tokens_so_far.len(),
            self.params.dims.window,
            self.pad,
        )
    }
}

impl Actor for PolicyActor<'_> {
    fn next_token(&mut self, tokens_so_far: &[TokenId]) -> Result<ActorChoice, PolicyError> {
        let out = forward(self.params, &self.window(tokens_so_far))?;
        let token = match self.decode {
            Decode::Greedy => greedy_token(&out.logits),
            Decode::Sample { temperature } => sample_token(&out.logits, temperature, &mut self.rng)?,
        };
        Ok(ActorChoice {
            token,
            logprob: logprob(&out.logits, token),
            value: out.value,
        })
    }

    fn score(&self, tokens_so_far: &[TokenId], token: TokenId) -> (f64, f64) {
        let out = forward(self.params, &self.window(tokens_so_far))
            .expect("scoring contexts come from valid rollouts");
        (logprob(&out.logits, token), out.value)
    }
}
