//! Finite-difference check of the policy's analytic backward pass on a
//! few random parameter vectors, reporting the worst relative error per
//! parameter block layout (shared and separate-critic trunks).
//!
//!     cargo run --release --example gradient_check

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokenagent::policy::{backward, forward, init_params, logprob, BackwardSample, Dims};
use tokenagent::vocab::TokenId;

fn check(dims: Dims, seed: u64) -> anyhow::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = init_params(seed, dims)?;
    let context: Vec<TokenId> = (0..dims.window)
        .map(|_| TokenId(rng.gen_range(0..dims.vocab_size as u32)))
        .collect();
    let token = TokenId(rng.gen_range(0..dims.vocab_size as u32));
    let (d_lp, d_v) = (0.7, -0.3);

    let analytic = backward(
        &params,
        &[BackwardSample {
            context: context.clone(),
            token,
            d_logprob: d_lp,
            d_value: d_v,
        }],
    )?;

    let loss = |p: &tokenagent::policy::PolicyParams| -> anyhow::Result<f64> {
        let out = forward(p, &context)?;
        Ok(d_lp * logprob(&out.logits, token) + d_v * out.value)
    };

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..params.theta.len() {
        let mut plus = params.clone();
        plus.theta[i] += h;
        let mut minus = params.clone();
        minus.theta[i] -= h;
        let fd = (loss(&plus)? - loss(&minus)?) / (2.0 * h);
        let denom = analytic[i].abs().max(fd.abs()).max(1e-8);
        worst = worst.max((analytic[i] - fd).abs() / denom);
    }
    Ok(worst)
}

fn main() -> anyhow::Result<()> {
    for separate_critic in [false, true] {
        let dims = Dims {
            vocab_size: 16,
            window: 4,
            embed: 4,
            hidden: 8,
            separate_critic,
        };
        let mut worst: f64 = 0.0;
        for seed in 0..5 {
            worst = worst.max(check(dims, seed)?);
        }
        println!(
            "separate_critic={separate_critic}: worst relative error over 5 random policies = {worst:.3e}"
        );
    }
    Ok(())
}
