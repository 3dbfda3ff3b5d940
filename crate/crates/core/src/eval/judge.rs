use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{decode_greedy, step_log_probs, text_vocab, Context, Policy};
use crate::rng;
use crate::sft::GeneratorMix;
use crate::world::{gen_prompt, qa_score, render_reason, Category, GridImage, PromptSpec, ReasonCode};

/// A (prompt, image) pair with its oracle score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub prompt: PromptSpec,
    pub image: GridImage,
    pub qa: f64,
}

impl LabeledPair {
    pub fn new(prompt: PromptSpec, image: GridImage) -> Self {
        let qa = qa_score(&prompt, &image);
        Self { prompt, image, qa }
    }

    /// The oracle's verdict: matching iff `qa > 0.5`; a half-satisfied
    /// prompt counts as non-matching.
    pub fn label(&self) -> bool {
        self.qa > 0.5
    }
}

/// `n` held-out pairs: evaluation-stream prompts with images from the
/// corpus generator mixture.
pub fn gen_labeled_pairs(n: usize, mix: &GeneratorMix, seed: u64) -> Vec<LabeledPair> {
    (0..n as u64)
        .map(|i| {
            let s = rng::derive(seed, &[rng::stream::PAIRS, i]);
            let prompt = gen_prompt(Category::ALL[i as usize % Category::ALL.len()], rng::derive(s, &[0]));
            let mut r = rng::rng(rng::derive(s, &[1]));
            let image = mix.draw(&prompt, &mut r);
            LabeledPair::new(prompt, image)
        })
        .collect()
}

fn judge_ctx(p: &LabeledPair) -> Context {
    Context::text(p.prompt.clone(), Vec::new(), p.image)
}

/// Fraction of pairs whose argmax first-token verdict matches the oracle label.
pub fn consistency_ratio<P: Policy + ?Sized>(policy: &P, pairs: &[LabeledPair], cfg_scale: f64) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let hits: usize = pairs
        .par_iter()
        .map(|p| {
            let lp = step_log_probs(policy, &judge_ctx(p), &[], cfg_scale);
            let yes = lp[text_vocab::YES as usize] >= lp[text_vocab::NO as usize];
            (yes == p.label()) as usize
        })
        .sum();
    hits as f64 / pairs.len() as f64
}

fn sorted(mut v: Vec<ReasonCode>) -> Vec<ReasonCode> {
    v.sort();
    v
}

/// Fraction of mismatched pairs whose greedily decoded reason tokens equal
/// the oracle's reason codes as a multiset.
pub fn reason_accuracy<P: Policy + ?Sized>(policy: &P, pairs: &[LabeledPair], cfg_scale: f64) -> Result<f64> {
    if let Some(p) = pairs.iter().find(|p| p.qa >= 1.0) {
        return Err(Error::InvalidInput(format!("pair for prompt {} is fully consistent", p.prompt.id)));
    }
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let hits: usize = pairs
        .par_iter()
        .map(|p| {
            let seg = decode_greedy(policy, &judge_ctx(p), cfg_scale);
            let got: Vec<ReasonCode> = seg.tokens.iter().filter_map(|&t| text_vocab::as_reason(t)).collect();
            let want = render_reason(&p.prompt, &p.image).codes();
            (sorted(got) == sorted(want)) as usize
        })
        .sum();
    Ok(hits as f64 / pairs.len() as f64)
}
