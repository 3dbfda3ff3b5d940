use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GrpoConfig;
use crate::error::{Error, Result};
use crate::policy::{accumulate_segment_grad, segment_logprob, Context, PolicyParams, WeightedSegment};

/// One generated segment of a rollout with the old policy's log-probs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutSegment {
    pub ctx: Context,
    pub tokens: Vec<u8>,
    pub cfg_scale: f64,
    pub old_logprobs: Option<Vec<f64>>,
}

/// Every segment of one group member, with that member's advantage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub segments: Vec<RolloutSegment>,
    pub advantage: f64,
}

impl ScoredSample {
    pub fn num_tokens(&self) -> usize {
        self.segments.iter().map(|s| s.tokens.len()).sum()
    }
}

/// `ρ_t = exp(logp_new_t - logp_old_t)`.
pub fn token_ratio(logp_new: &[f64], logp_old: &[f64]) -> Vec<f64> {
    assert_eq!(logp_new.len(), logp_old.len());
    logp_new.iter().zip(logp_old).map(|(n, o)| (n - o).exp()).collect()
}

/// Per-token KL estimate `r - log r - 1` with `r = π_ref / π`.
pub fn kl_token(logp_new: &[f64], logp_ref: &[f64]) -> Vec<f64> {
    assert_eq!(logp_new.len(), logp_ref.len());
    logp_new
        .iter()
        .zip(logp_ref)
        .map(|(n, r)| {
            let log_r = r - n;
            log_r.exp() - log_r - 1.0
        })
        .collect()
}

/// Fill missing old-policy log-probs by replaying `old` over each segment.
pub fn replay_old_logprobs(samples: &mut [ScoredSample], old: &PolicyParams) {
    for seg in samples.iter_mut().flat_map(|s| s.segments.iter_mut()) {
        if seg.old_logprobs.is_none() {
            seg.old_logprobs = Some(segment_logprob(old, &seg.ctx, &seg.tokens, seg.cfg_scale));
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub tokens: usize,
    pub kl_mean: f64,
    pub clipped_fraction: f64,
}

struct SampleTerms {
    objective: f64,
    kl: f64,
    clipped: usize,
    grad: PolicyParams,
}

fn sample_terms(
    sample: &ScoredSample,
    theta: &PolicyParams,
    theta_ref: &PolicyParams,
    config: &GrpoConfig,
    norm: f64,
) -> Result<SampleTerms> {
    let mut grad = theta.zeros_like();
    let (mut objective, mut kl_sum, mut clipped) = (0.0, 0.0, 0usize);
    let a = sample.advantage;
    let (lo, hi) = (1.0 - config.clip_eps, 1.0 + config.clip_eps);
    for seg in &sample.segments {
        let old = seg.old_logprobs.as_ref().ok_or(Error::MissingOldLogprobs)?;
        if old.len() != seg.tokens.len() {
            return Err(Error::MissingOldLogprobs);
        }
        let new = segment_logprob(theta, &seg.ctx, &seg.tokens, seg.cfg_scale);
        let reference = segment_logprob(theta_ref, &seg.ctx, &seg.tokens, seg.cfg_scale);
        let rho = token_ratio(&new, old);
        let kl = kl_token(&new, &reference);
        let mut weights = Vec::with_capacity(seg.tokens.len());
        for t in 0..seg.tokens.len() {
            let unclipped = rho[t] * a;
            let clipped_val = rho[t].clamp(lo, hi) * a;
            let through_ratio = unclipped <= clipped_val;
            if !through_ratio {
                clipped += 1;
            }
            objective += unclipped.min(clipped_val) - config.beta * kl[t];
            kl_sum += kl[t];
            let r = (reference[t] - new[t]).exp();
            let w_surrogate = if through_ratio { unclipped } else { 0.0 };
            weights.push((w_surrogate - config.beta * (1.0 - r)) / norm);
        }
        accumulate_segment_grad(
            theta,
            &WeightedSegment { ctx: &seg.ctx, tokens: &seg.tokens, cfg_scale: seg.cfg_scale, weights: &weights },
            &mut grad,
        );
    }
    Ok(SampleTerms { objective: objective / norm, kl: kl_sum, clipped, grad })
}

/// The GRPO objective (to be maximized) and its gradient with respect to `theta`.
///
/// The objective is the token mean, over every token of every sample in the
/// batch, of `min(ρA, clip(ρ, 1-ε, 1+ε)A) - β KL`. Old-policy log-probs come
/// from the samples' caches.
pub fn grpo_loss_grad(
    samples: &[ScoredSample],
    theta: &PolicyParams,
    theta_ref: &PolicyParams,
    config: &GrpoConfig,
) -> Result<(f64, PolicyParams, LossStats)> {
    let tokens: usize = samples.iter().map(ScoredSample::num_tokens).sum();
    let mut grad = theta.zeros_like();
    if tokens == 0 {
        return Ok((0.0, grad, LossStats::default()));
    }
    let norm = tokens as f64;
    let parts: Vec<Result<SampleTerms>> = samples
        .par_iter()
        .map(|s| sample_terms(s, theta, theta_ref, config, norm))
        .collect();
    let (mut objective, mut kl, mut clipped) = (0.0, 0.0, 0usize);
    for part in parts {
        let part = part?;
        objective += part.objective;
        kl += part.kl;
        clipped += part.clipped;
        grad.add_scaled(&part.grad, 1.0);
    }
    let stats = LossStats { tokens, kl_mean: kl / norm, clipped_fraction: clipped as f64 / norm };
    Ok((objective, grad, stats))
}
