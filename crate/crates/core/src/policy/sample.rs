use rand::Rng as _;

use super::context::{text_vocab, Context, Head};
use super::{cfg_combine, log_softmax, topk_filter, Policy};
use crate::rng;
use crate::world::{GRID_CELLS, IMAGE_VOCAB};

/// Tokens the segment grammar permits after `prefix`.
///
/// Image segments allow every cell token. Text segments are
/// `verdict reason* EOS`: the first step allows only `YES`/`NO`, later steps
/// allow reason tokens or `EOS`, and `EOS` alone once `max_reason` reasons
/// have been emitted.
pub fn allowed_tokens(head: Head, prefix: &[u8], max_reason: usize) -> Vec<bool> {
    match head {
        Head::Image => vec![true; IMAGE_VOCAB],
        Head::Text => {
            let mut allowed = vec![false; text_vocab::SIZE];
            if prefix.is_empty() {
                allowed[text_vocab::YES as usize] = true;
                allowed[text_vocab::NO as usize] = true;
            } else {
                allowed[text_vocab::EOS as usize] = true;
                if prefix.len() - 1 < max_reason {
                    for t in text_vocab::FIRST_REASON..text_vocab::EOS {
                        allowed[t as usize] = true;
                    }
                }
            }
            allowed
        }
    }
}

/// Whether a segment with these tokens is complete.
pub fn is_complete(head: Head, tokens: &[u8]) -> bool {
    match head {
        Head::Image => tokens.len() >= GRID_CELLS,
        Head::Text => tokens.last() == Some(&text_vocab::EOS),
    }
}

/// Guided logits after `prefix`. Unit scale (or an already padded context)
/// skips the unconditional branch.
pub fn guided_logits<P: Policy + ?Sized>(policy: &P, ctx: &Context, prefix: &[u8], cfg_scale: f64) -> Vec<f64> {
    let cond = policy.branch_logits(ctx, prefix, ctx.pad);
    if cfg_scale == 1.0 || ctx.pad {
        return cond;
    }
    let uncond = policy.branch_logits(ctx, prefix, true);
    cfg_combine(&cond, &uncond, cfg_scale)
}

fn masked(mut logits: Vec<f64>, allowed: &[bool]) -> Vec<f64> {
    for (l, &ok) in logits.iter_mut().zip(allowed) {
        if !ok {
            *l = f64::NEG_INFINITY;
        }
    }
    logits
}

/// Log-probabilities of the next token under the guided, grammar-masked,
/// untruncated distribution.
pub fn step_log_probs<P: Policy + ?Sized>(policy: &P, ctx: &Context, prefix: &[u8], cfg_scale: f64) -> Vec<f64> {
    let allowed = allowed_tokens(ctx.head, prefix, policy.max_reason());
    log_softmax(&masked(guided_logits(policy, ctx, prefix, cfg_scale), &allowed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledSegment {
    pub tokens: Vec<u8>,
    pub logprobs: Vec<f64>,
}

fn draw(logits: &[f64], r: &mut rng::Rng) -> usize {
    let probs: Vec<f64> = log_softmax(logits).into_iter().map(f64::exp).collect();
    let u: f64 = r.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Sample one segment of the active head with top-k truncation. Recorded
/// log-probs are taken before truncation.
pub fn sample_segment<P: Policy + ?Sized>(
    policy: &P,
    ctx: &Context,
    cfg_scale: f64,
    k: usize,
    seed: u64,
) -> SampledSegment {
    let mut r = rng::rng(seed);
    let mut tokens = Vec::new();
    let mut logprobs = Vec::new();
    while !is_complete(ctx.head, &tokens) {
        let lp = step_log_probs(policy, ctx, &tokens, cfg_scale);
        let tok = draw(&topk_filter(&lp, k), &mut r);
        logprobs.push(lp[tok]);
        tokens.push(tok as u8);
    }
    SampledSegment { tokens, logprobs }
}

/// Argmax decoding (lowest id on ties).
pub fn decode_greedy<P: Policy + ?Sized>(policy: &P, ctx: &Context, cfg_scale: f64) -> SampledSegment {
    let mut tokens = Vec::new();
    let mut logprobs = Vec::new();
    while !is_complete(ctx.head, &tokens) {
        let lp = step_log_probs(policy, ctx, &tokens, cfg_scale);
        let mut best = 0;
        for i in 1..lp.len() {
            if lp[i] > lp[best] {
                best = i;
            }
        }
        logprobs.push(lp[best]);
        tokens.push(best as u8);
    }
    SampledSegment { tokens, logprobs }
}

/// Teacher-forced log-probs of `tokens`.
pub fn segment_logprob<P: Policy + ?Sized>(policy: &P, ctx: &Context, tokens: &[u8], cfg_scale: f64) -> Vec<f64> {
    (0..tokens.len())
        .map(|t| step_log_probs(policy, ctx, &tokens[..t], cfg_scale)[tokens[t] as usize])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{random_params, FeatureConfig, PolicyParams};
    use crate::world::{gen_prompt, Category, GridImage};

    fn image_ctx() -> Context {
        Context::image(gen_prompt(Category::Position, 11), Vec::new())
    }

    fn text_ctx() -> Context {
        let mut r = rng::rng(5);
        Context::text(gen_prompt(Category::TwoObj, 2), Vec::new(), crate::world::random_source(&mut r))
    }

    #[test]
    fn image_segments_have_sixteen_tokens_and_replay() {
        let p = random_params(1, 0.5);
        let seg = sample_segment(&p, &image_ctx(), 5.0, 13, 9);
        assert_eq!(seg.tokens.len(), GRID_CELLS);
        assert!(GridImage::from_ids(&seg.tokens).is_ok());
        let replay = segment_logprob(&p, &image_ctx(), &seg.tokens, 5.0);
        for (a, b) in replay.iter().zip(&seg.logprobs) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(seg, sample_segment(&p, &image_ctx(), 5.0, 13, 9));
    }

    #[test]
    fn text_segments_follow_the_grammar() {
        let p = random_params(2, 1.0);
        for seed in 0..50 {
            let seg = sample_segment(&p, &text_ctx(), 1.0, 11, seed);
            assert!(seg.tokens[0] == text_vocab::YES || seg.tokens[0] == text_vocab::NO);
            assert_eq!(*seg.tokens.last().unwrap(), text_vocab::EOS);
            assert!(seg.tokens[1..seg.tokens.len() - 1].iter().all(|&t| text_vocab::is_reason(t)));
            assert!(seg.tokens.len() <= crate::policy::DEFAULT_MAX_REASON + 2);
        }
    }

    #[test]
    fn k_one_equals_greedy() {
        let p = random_params(3, 0.8);
        for seed in 0..5 {
            assert_eq!(sample_segment(&p, &image_ctx(), 5.0, 1, seed).tokens, decode_greedy(&p, &image_ctx(), 5.0).tokens);
            assert_eq!(sample_segment(&p, &text_ctx(), 1.0, 1, seed).tokens, decode_greedy(&p, &text_ctx(), 1.0).tokens);
        }
    }

    #[test]
    fn sampled_tokens_lie_in_topk() {
        let p = random_params(4, 2.0);
        let ctx = image_ctx();
        for seed in 0..20 {
            let seg = sample_segment(&p, &ctx, 5.0, 3, seed);
            for t in 0..seg.tokens.len() {
                let lp = step_log_probs(&p, &ctx, &seg.tokens[..t], 5.0);
                let kept = topk_filter(&lp, 3);
                assert!(kept[seg.tokens[t] as usize].is_finite());
            }
        }
    }

    #[test]
    fn zero_params_are_uniform_over_allowed_tokens() {
        let p = PolicyParams::zeros(FeatureConfig::default());
        let seg = sample_segment(&p, &image_ctx(), 5.0, 13, 0);
        assert!(seg.logprobs.iter().all(|&l| (l + (13f64).ln()).abs() < 1e-12));
        let lp = step_log_probs(&p, &text_ctx(), &[], 1.0);
        assert!((lp[text_vocab::YES as usize] + 2f64.ln()).abs() < 1e-12);
        let lp = step_log_probs(&p, &text_ctx(), &[text_vocab::NO], 1.0);
        assert!((lp[text_vocab::EOS as usize] + 9f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn eos_is_forced_after_max_reasons() {
        let mut prefix = vec![text_vocab::NO];
        prefix.extend(std::iter::repeat(text_vocab::FIRST_REASON).take(8));
        let allowed = allowed_tokens(Head::Text, &prefix, 8);
        assert_eq!(allowed.iter().filter(|&&a| a).count(), 1);
        assert!(allowed[text_vocab::EOS as usize]);
    }
}
