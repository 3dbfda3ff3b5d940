use serde::{Deserialize, Serialize};

use crate::grpo::RolloutSegment;
use crate::policy::{
    decode_greedy, sample_segment, text_vocab, Context, Policy, PriorRound, SampledSegment, DEFAULT_TOP_K_IMAGE,
    DEFAULT_TOP_K_TEXT,
};
use crate::rng;
use crate::world::{qa_score, GridImage, PromptSpec, ReasonCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Yes,
    No,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    SelfAccept,
    RoundCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpisodeMode {
    Inference,
    /// Also scores every round with the oracle.
    Rollout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TextDecoding {
    Sample,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub rounds: usize,
    pub image_cfg: f64,
    pub text_cfg: f64,
    pub top_k_image: usize,
    pub top_k_text: usize,
    pub text_decoding: TextDecoding,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            rounds: 3,
            image_cfg: 5.0,
            text_cfg: 1.0,
            top_k_image: DEFAULT_TOP_K_IMAGE,
            top_k_text: DEFAULT_TOP_K_TEXT,
            text_decoding: TextDecoding::Sample,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub image: GridImage,
    pub image_logprobs: Vec<f64>,
    pub verdict: Verdict,
    pub reason: Vec<ReasonCode>,
    /// Full text segment: verdict, reasons, `EOS`.
    pub text_tokens: Vec<u8>,
    pub text_logprobs: Vec<f64>,
    pub qa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub prompt: PromptSpec,
    pub rounds: Vec<RoundRecord>,
    pub stopped_by: StopReason,
    pub image_cfg: f64,
    pub text_cfg: f64,
}

impl Trajectory {
    pub fn k(&self) -> usize {
        self.rounds.len()
    }

    fn prior(&self, upto: usize) -> Vec<PriorRound> {
        self.rounds[..upto]
            .iter()
            .map(|r| PriorRound { image: r.image, reason: r.reason.clone() })
            .collect()
    }

    /// Image and text contexts of round `r` (0-based), as they were during generation.
    pub fn contexts(&self, r: usize) -> (Context, Context) {
        let prior = self.prior(r);
        (
            Context::image(self.prompt.clone(), prior.clone()),
            Context::text(self.prompt.clone(), prior, self.rounds[r].image),
        )
    }

    /// Every generated segment with its cached log-probs, in generation order.
    pub fn segments(&self) -> Vec<RolloutSegment> {
        let mut out = Vec::with_capacity(2 * self.rounds.len());
        for (r, round) in self.rounds.iter().enumerate() {
            let (img_ctx, txt_ctx) = self.contexts(r);
            out.push(RolloutSegment {
                ctx: img_ctx,
                tokens: round.image.ids().to_vec(),
                cfg_scale: self.image_cfg,
                old_logprobs: Some(round.image_logprobs.clone()),
            });
            out.push(RolloutSegment {
                ctx: txt_ctx,
                tokens: round.text_tokens.clone(),
                cfg_scale: self.text_cfg,
                old_logprobs: Some(round.text_logprobs.clone()),
            });
        }
        out
    }

    pub fn num_tokens(&self) -> usize {
        self.rounds.iter().map(|r| r.image_logprobs.len() + r.text_logprobs.len()).sum()
    }
}

/// The image the episode outputs: the last round's.
pub fn final_image(traj: &Trajectory) -> GridImage {
    traj.rounds.last().expect("trajectory has at least one round").image
}

/// The round-1 image, i.e. the output without introspection.
pub fn first_image(traj: &Trajectory) -> GridImage {
    traj.rounds.first().expect("trajectory has at least one round").image
}

fn decode<P: Policy + ?Sized>(policy: &P, ctx: &Context, cfg: f64, k: usize, how: TextDecoding, seed: u64) -> SampledSegment {
    match how {
        TextDecoding::Sample => sample_segment(policy, ctx, cfg, k, seed),
        TextDecoding::Greedy => decode_greedy(policy, ctx, cfg),
    }
}

/// Run one episode. Round `r` draws its image from seed `derive(seed, [r, 0])`
/// and its text from `derive(seed, [r, 1])`.
pub fn run_episode<P: Policy + ?Sized>(
    policy: &P,
    prompt: &PromptSpec,
    config: &EpisodeConfig,
    seed: u64,
    mode: EpisodeMode,
) -> Trajectory {
    assert!(config.rounds >= 1, "round cap must be at least 1");
    let mut rounds: Vec<RoundRecord> = Vec::new();
    let mut prior: Vec<PriorRound> = Vec::new();
    let stopped_by = loop {
        let r = rounds.len() as u64;
        let img_ctx = Context::image(prompt.clone(), prior.clone());
        let img = sample_segment(policy, &img_ctx, config.image_cfg, config.top_k_image, rng::derive(seed, &[r, 0]));
        let image = GridImage::from_ids(&img.tokens).expect("image head emits valid cells");

        let txt_ctx = Context::text(prompt.clone(), prior.clone(), image);
        let txt = decode(
            policy,
            &txt_ctx,
            config.text_cfg,
            config.top_k_text,
            config.text_decoding,
            rng::derive(seed, &[r, 1]),
        );
        let verdict = if txt.tokens[0] == text_vocab::YES { Verdict::Yes } else { Verdict::No };
        let reason: Vec<ReasonCode> = txt.tokens.iter().filter_map(|&t| text_vocab::as_reason(t)).collect();
        let qa = matches!(mode, EpisodeMode::Rollout).then(|| qa_score(prompt, &image));

        prior.push(PriorRound { image, reason: reason.clone() });
        rounds.push(RoundRecord {
            image,
            image_logprobs: img.logprobs,
            verdict,
            reason,
            text_tokens: txt.tokens,
            text_logprobs: txt.logprobs,
            qa,
        });
        if verdict == Verdict::Yes {
            break StopReason::SelfAccept;
        }
        if rounds.len() >= config.rounds {
            break StopReason::RoundCap;
        }
    };
    Trajectory { prompt: prompt.clone(), rounds, stopped_by, image_cfg: config.image_cfg, text_cfg: config.text_cfg }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpRound {
    pub cells: GridImage,
    pub verdict: Verdict,
    pub reason: Vec<ReasonCode>,
    pub qa: f64,
}

/// Compact JSON-lines form of a trajectory for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDump {
    pub prompt_id: u64,
    pub surface: String,
    pub rounds: Vec<DumpRound>,
    pub stopped_by: StopReason,
}

impl From<&Trajectory> for TrajectoryDump {
    fn from(t: &Trajectory) -> Self {
        Self {
            prompt_id: t.prompt.id,
            surface: t.prompt.surface.clone(),
            rounds: t
                .rounds
                .iter()
                .map(|r| DumpRound {
                    cells: r.image,
                    verdict: r.verdict,
                    reason: r.reason.clone(),
                    qa: r.qa.unwrap_or_else(|| qa_score(&t.prompt, &r.image)),
                })
                .collect(),
            stopped_by: t.stopped_by,
        }
    }
}
