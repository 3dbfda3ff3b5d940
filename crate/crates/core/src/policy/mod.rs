//! The two-head autoregressive policy.
//!
//! Each head is a linear softmax over hand-built features, so log-probs and
//! their parameter gradients are exact. Generation uses classifier-free
//! guidance on the logits and top-k sampling; training log-probs are taken
//! under the guided, untruncated distribution.

mod checkpoint;
mod context;
pub mod features;
mod grad;
mod sample;
pub mod scripted;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use context::{text_vocab, Condition, Context, Head, PriorRound};
pub use grad::{accumulate_segment_grad, weighted_logprob_grad, WeightedSegment};
pub use sample::{
    allowed_tokens, decode_greedy, guided_logits, sample_segment, segment_logprob, step_log_probs,
    SampledSegment,
};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::world::IMAGE_VOCAB;

/// Default top-k for image tokens (the whole image vocabulary).
pub const DEFAULT_TOP_K_IMAGE: usize = IMAGE_VOCAB;
/// Default top-k for text tokens.
pub const DEFAULT_TOP_K_TEXT: usize = if 50 < text_vocab::SIZE { 50 } else { text_vocab::SIZE };
pub const DEFAULT_MAX_REASON: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub version: u32,
    pub image_vocab: usize,
    pub text_vocab: usize,
    pub image_features: usize,
    pub text_features: usize,
    /// Reason tokens allowed before `EOS` is forced.
    pub max_reason: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            version: features::FEATURE_VERSION,
            image_vocab: IMAGE_VOCAB,
            text_vocab: text_vocab::SIZE,
            image_features: features::img::DIM,
            text_features: features::txt::DIM,
            max_reason: DEFAULT_MAX_REASON,
        }
    }
}

impl FeatureConfig {
    pub fn vocab(&self, head: Head) -> usize {
        match head {
            Head::Image => self.image_vocab,
            Head::Text => self.text_vocab,
        }
    }

    pub fn features(&self, head: Head) -> usize {
        match head {
            Head::Image => self.image_features,
            Head::Text => self.text_features,
        }
    }

    pub fn num_params(&self) -> usize {
        self.image_vocab * self.image_features + self.text_vocab * self.text_features
    }

    pub fn hash(&self) -> u64 {
        let desc = format!(
            "reflectgen-features v{} iv{} tv{} if{} tf{} mr{}",
            self.version, self.image_vocab, self.text_vocab, self.image_features, self.text_features, self.max_reason
        );
        let digest = Sha256::digest(desc.as_bytes());
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    /// Checks that this configuration matches the featurizer compiled in.
    pub fn validate(&self) -> Result<()> {
        let expected = FeatureConfig { max_reason: self.max_reason, ..FeatureConfig::default() };
        if *self != expected {
            return Err(Error::Config(format!(
                "feature config {self:?} does not match the featurizer ({expected:?})"
            )));
        }
        if self.max_reason == 0 {
            return Err(Error::Config("max_reason must be positive".into()));
        }
        Ok(())
    }
}

/// Weights of both heads, stored flat: image matrix (row-major,
/// `image_vocab x image_features`) followed by the text matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub config: FeatureConfig,
    weights: Vec<f64>,
}

impl PolicyParams {
    /// All-zero weights: the uniform policy.
    pub fn zeros(config: FeatureConfig) -> Self {
        let n = config.num_params();
        Self { config, weights: vec![0.0; n] }
    }

    pub fn from_weights(config: FeatureConfig, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != config.num_params() {
            return Err(Error::Config(format!(
                "expected {} weights, got {}",
                config.num_params(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Config("non-finite weight".into()));
        }
        Ok(Self { config, weights })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config.clone())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn flat(&self) -> &[f64] {
        &self.weights
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn head_range(&self, head: Head) -> std::ops::Range<usize> {
        let split = self.config.image_vocab * self.config.image_features;
        match head {
            Head::Image => 0..split,
            Head::Text => split..self.weights.len(),
        }
    }

    pub fn head(&self, head: Head) -> &[f64] {
        &self.weights[self.head_range(head)]
    }

    pub fn head_mut(&mut self, head: Head) -> &mut [f64] {
        let r = self.head_range(head);
        &mut self.weights[r]
    }

    /// Flat index of weight `(token, feature)` in `head`.
    pub fn index(&self, head: Head, token: usize, feature: usize) -> usize {
        self.head_range(head).start + token * self.config.features(head) + feature
    }

    pub fn get(&self, head: Head, token: usize, feature: usize) -> f64 {
        self.weights[self.index(head, token, feature)]
    }

    pub fn set(&mut self, head: Head, token: usize, feature: usize, value: f64) {
        let i = self.index(head, token, feature);
        self.weights[i] = value;
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &PolicyParams, scale: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.weights.iter_mut().for_each(|w| *w *= s);
    }

    pub fn norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &PolicyParams) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    /// Logits of one branch: `weights(head) . features`.
    pub fn logits_from_features(&self, head: Head, phi: &[f64]) -> Vec<f64> {
        let f = self.config.features(head);
        self.head(head).chunks_exact(f).map(|row| dot(row, phi)).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Anything that can score the next token of a segment.
pub trait Policy: Sync {
    /// Unguided logits of one branch; `pad` masks the text prompt or instruction.
    fn branch_logits(&self, ctx: &Context, prefix: &[u8], pad: bool) -> Vec<f64>;

    /// Reason tokens allowed in a text segment before `EOS` is forced.
    fn max_reason(&self) -> usize {
        DEFAULT_MAX_REASON
    }
}

impl Policy for PolicyParams {
    fn branch_logits(&self, ctx: &Context, prefix: &[u8], pad: bool) -> Vec<f64> {
        let mut phi = vec![0.0; features::dim(ctx.head)];
        features::featurize_into(ctx, prefix, pad || ctx.pad, &mut phi);
        self.logits_from_features(ctx.head, &phi)
    }

    fn max_reason(&self) -> usize {
        self.config.max_reason
    }
}

/// `logits(params, ctx)`: conditional logits of the active head after `prefix`.
pub fn logits(params: &PolicyParams, ctx: &Context, prefix: &[u8]) -> Result<Vec<f64>> {
    let head = ctx.head;
    if params.config.features(head) != features::dim(head) {
        return Err(Error::Config(format!(
            "{head:?} head expects {} features, featurizer produces {}",
            params.config.features(head),
            features::dim(head)
        )));
    }
    Ok(params.branch_logits(ctx, prefix, ctx.pad))
}

/// Classifier-free guidance: `uncond + scale * (cond - uncond)`, computed as
/// `scale * cond + (1 - scale) * uncond` so that unit scale returns `cond` exactly.
pub fn cfg_combine(cond: &[f64], uncond: &[f64], scale: f64) -> Vec<f64> {
    assert_eq!(cond.len(), uncond.len(), "cfg branches differ in length");
    if scale == 1.0 {
        return cond.to_vec();
    }
    if scale == 0.0 {
        return uncond.to_vec();
    }
    cond.iter().zip(uncond).map(|(c, u)| scale * c + (1.0 - scale) * u).collect()
}

/// Keep the `k` largest logits; ties go to the lower token id. Others become `-inf`.
pub fn topk_filter(logits: &[f64], k: usize) -> Vec<f64> {
    assert!(k >= 1, "top-k needs k >= 1");
    if k >= logits.len() {
        return logits.to_vec();
    }
    let mut order: Vec<usize> = (0..logits.len()).collect();
    order.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));
    let mut out = vec![f64::NEG_INFINITY; logits.len()];
    for &i in &order[..k] {
        out[i] = logits[i];
    }
    out
}

/// Numerically stable log-softmax; `-inf` entries stay `-inf`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&l| (l - m).exp()).sum::<f64>().ln();
    logits.iter().map(|&l| l - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// Weights drawn uniformly from `[-scale, scale]`; a test helper.
#[cfg(test)]
pub(crate) fn random_params(seed: u64, scale: f64) -> PolicyParams {
    use rand::Rng as _;
    let cfg = FeatureConfig::default();
    let mut r = crate::rng::rng(seed);
    let w = (0..cfg.num_params()).map(|_| r.random_range(-scale..=scale)).collect();
    PolicyParams::from_weights(cfg, w).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cfg_identities() {
        let c = [0.3, -1.7, 2.0];
        let u = [1.1, 0.4, -0.2];
        assert_eq!(cfg_combine(&c, &u, 1.0), c.to_vec());
        assert_eq!(cfg_combine(&c, &u, 0.0), u.to_vec());
        assert_eq!(cfg_combine(&[2.0, 0.0], &[1.0, 0.0], 5.0), vec![6.0, 0.0]);
    }

    #[test]
    fn topk_tie_break_prefers_lower_id() {
        let out = topk_filter(&[3.0, 1.0, 2.0, 2.0], 2);
        let kept: Vec<usize> = (0..4).filter(|&i| out[i].is_finite()).collect();
        assert_eq!(kept, vec![0, 2]);
        assert_eq!(topk_filter(&[1.0, 2.0], 5), vec![1.0, 2.0]);
        let one = topk_filter(&[0.5, 4.0, 4.0], 1);
        assert!(one[1].is_finite() && one[0].is_infinite() && one[2].is_infinite());
    }

    #[test]
    fn softmax_normalizes_with_masked_entries() {
        let p = softmax(&[1.0, f64::NEG_INFINITY, -3.0, 700.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(p[1], 0.0);
    }

    #[test]
    fn default_config_validates() {
        FeatureConfig::default().validate().unwrap();
        let bad = FeatureConfig { image_features: 3, ..FeatureConfig::default() };
        assert!(bad.validate().is_err());
    }
}

#[cfg(test)]
mod linearity {
    use super::*;
    use crate::world::{gen_prompt, Category};

    #[test]
    fn zero_weights_give_uniform_logits() {
        let p = PolicyParams::zeros(FeatureConfig::default());
        let ctx = Context::image(gen_prompt(Category::TwoObj, 3), Vec::new());
        assert!(logits(&p, &ctx, &[]).unwrap().iter().all(|&l| l == 0.0));
    }

    #[test]
    fn one_weight_moves_one_logit_by_its_feature() {
        let mut p = random_params(4, 0.3);
        let ctx = Context::image(gen_prompt(Category::Position, 11), Vec::new());
        let prefix = [0u8, 5, 0];
        let phi = features::featurize(&ctx, &prefix);
        let f = (0..phi.len()).find(|&i| phi[i] != 0.0 && i > 0).unwrap();
        let before = logits(&p, &ctx, &prefix).unwrap();
        let v = 6;
        let w = p.get(Head::Image, v, f);
        p.set(Head::Image, v, f, w + 0.25);
        let after = logits(&p, &ctx, &prefix).unwrap();
        for t in 0..before.len() {
            let want = if t == v { before[t] + 0.25 * phi[f] } else { before[t] };
            assert!((after[t] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_a_config_error() {
        let cfg = FeatureConfig { text_features: 5, ..FeatureConfig::default() };
        let p = PolicyParams::zeros(cfg);
        let prompt = gen_prompt(Category::Color, 1);
        let ctx = Context::text(prompt, Vec::new(), crate::world::GridImage::empty());
        assert!(matches!(logits(&p, &ctx, &[]), Err(Error::Config(_))));
    }
}
