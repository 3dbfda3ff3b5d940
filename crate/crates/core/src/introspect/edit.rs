use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grpo::{edit_reward, group_advantages, GrpoConfig, RolloutSegment, ScoredSample};
use crate::policy::{sample_segment, Context, Policy, DEFAULT_TOP_K_IMAGE};
use crate::rng;
use crate::world::{cell_roles, edit_scores, EditInstruction, GridImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EditRewardMode {
    /// `0.5 · flw + psv`.
    #[default]
    Full,
    /// `psv` alone (ablation).
    PreserveOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EditRolloutConfig {
    pub cfg_scale: f64,
    pub top_k: usize,
    pub reward: EditRewardMode,
}

impl Default for EditRolloutConfig {
    fn default() -> Self {
        Self { cfg_scale: 4.0, top_k: DEFAULT_TOP_K_IMAGE, reward: EditRewardMode::Full }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditSample {
    pub output: GridImage,
    pub logprobs: Vec<f64>,
    pub flw: f64,
    pub psv: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditGroupRollout {
    pub source: GridImage,
    pub instr: EditInstruction,
    pub cfg_scale: f64,
    pub samples: Vec<EditSample>,
    pub advantages: Vec<f64>,
}

impl EditGroupRollout {
    pub fn scored_samples(&self) -> Vec<ScoredSample> {
        let ctx = Context::edit(self.source, self.instr.clone());
        self.samples
            .iter()
            .zip(&self.advantages)
            .map(|(s, &a)| ScoredSample {
                segments: vec![RolloutSegment {
                    ctx: ctx.clone(),
                    tokens: s.output.ids().to_vec(),
                    cfg_scale: self.cfg_scale,
                    old_logprobs: Some(s.logprobs.clone()),
                }],
                advantage: a,
            })
            .collect()
    }
}

/// Sample `G` single-round edits of `source` and score them.
pub fn edit_rollout_group<P: Policy + ?Sized>(
    policy_old: &P,
    source: &GridImage,
    instr: &EditInstruction,
    grpo: &GrpoConfig,
    config: &EditRolloutConfig,
    seed: u64,
) -> Result<EditGroupRollout> {
    grpo.validate()?;
    cell_roles(source, instr)?;
    let ctx = Context::edit(*source, instr.clone());
    let samples = (0..grpo.group_size as u64)
        .into_par_iter()
        .map(|i| {
            let seg = sample_segment(policy_old, &ctx, config.cfg_scale, config.top_k, rng::derive(seed, &[i]));
            let output = GridImage::from_ids(&seg.tokens).expect("image head emits valid cells");
            let (flw, psv) = edit_scores(source, instr, &output)?;
            let reward = match config.reward {
                EditRewardMode::Full => edit_reward(flw, psv),
                EditRewardMode::PreserveOnly => psv,
            };
            Ok(EditSample { output, logprobs: seg.logprobs, flw, psv, reward })
        })
        .collect::<Result<Vec<_>>>()?;
    let totals: Vec<f64> = samples.iter().map(|s| s.reward).collect();
    let advantages = group_advantages(&totals, grpo.std_floor);
    Ok(EditGroupRollout { source: *source, instr: instr.clone(), cfg_scale: config.cfg_scale, samples, advantages })
}
