use serde::{Deserialize, Serialize};

use super::metrics::{RunSink, SftMetricsRow};
use super::optim::{optimizer_step, AdamConfig, OptimState};
use super::schedule::{lr_at, ScheduleConfig};
use crate::error::{Error, Result};
use crate::policy::{FeatureConfig, PolicyParams};
use crate::rng;
use crate::sft::{
    build_corpus, build_tasks, mixed_sampler, sft_batch_loss_grad, GeneratorMix, MixConfig, SftExample, Thresholds,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SftConfig {
    pub seed: u64,
    pub batch_size: usize,
    pub corpus_prompts: usize,
    pub images_per_prompt: usize,
    pub generator: GeneratorMix,
    pub thresholds: Thresholds,
    pub task2_rounds: usize,
    pub task3_rounds: usize,
    pub mix: MixConfig,
    pub schedule: ScheduleConfig,
    pub optimizer: AdamConfig,
    /// Held-out loss is recorded every this many steps.
    pub eval_every: usize,
    pub heldout_examples: usize,
}

impl Default for SftConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            batch_size: 32,
            corpus_prompts: 2000,
            images_per_prompt: 8,
            generator: GeneratorMix::default(),
            thresholds: Thresholds::default(),
            task2_rounds: 3,
            task3_rounds: 2,
            mix: MixConfig::default(),
            schedule: ScheduleConfig::cosine(0.02, 0.002, 100, 3000),
            optimizer: AdamConfig::default(),
            eval_every: 250,
            heldout_examples: 256,
        }
    }
}

impl SftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        self.schedule.validate()?;
        self.optimizer.validate()?;
        self.thresholds.validate()?;
        self.mix.validate()?;
        self.generator.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SftOutcome {
    pub params: PolicyParams,
    /// Mean per-example NLL of every training batch.
    pub train_loss: Vec<f64>,
    /// `(step, mean NLL)` on a frozen held-out batch.
    pub heldout_loss: Vec<(usize, f64)>,
}

/// Task streams over a fresh corpus of `prompts` entries drawn from `corpus_seed`.
pub fn build_sft_streams(config: &SftConfig, corpus_seed: u64, prompts: usize) -> Result<[Vec<SftExample>; 3]> {
    let corpus = build_corpus(&config.generator, prompts, config.images_per_prompt, corpus_seed)?;
    build_tasks(&corpus, &config.thresholds, config.task2_rounds, config.task3_rounds, corpus_seed)
}

fn mean_loss(params: &PolicyParams, batch: &[SftExample]) -> f64 {
    sft_batch_loss_grad(params, batch).0 / batch.len() as f64
}

/// Mixed-task SFT from `init` (zeros when absent).
pub fn train_sft(config: &SftConfig, init: Option<PolicyParams>, mut sink: Option<&mut RunSink>) -> Result<SftOutcome> {
    config.validate()?;
    let streams = build_sft_streams(config, config.seed, config.corpus_prompts)?;
    let held_prompts = (config.heldout_examples / 4).max(8);
    let held_streams = build_sft_streams(config, rng::derive(config.seed, &[0x4e1d]), held_prompts)?;
    let held: Vec<SftExample> = mixed_sampler(held_streams, MixConfig { prompt_dropout: 0.0, ..config.mix.clone() }, 1)?
        .take(config.heldout_examples)
        .collect();
    let examples = mixed_sampler(streams, config.mix.clone(), config.seed)?;
    train_on(config, examples, &held, init, sink.as_deref_mut())
}

pub(super) fn train_on(
    config: &SftConfig,
    mut examples: impl Iterator<Item = SftExample>,
    held: &[SftExample],
    init: Option<PolicyParams>,
    mut sink: Option<&mut RunSink>,
) -> Result<SftOutcome> {
    let mut params = init.unwrap_or_else(|| PolicyParams::zeros(FeatureConfig::default()));
    let mut state = OptimState::new(config.optimizer.clone(), params.len());
    let mut train_loss = Vec::with_capacity(config.schedule.total_steps);
    let mut heldout_loss = Vec::new();
    if !held.is_empty() {
        heldout_loss.push((0, mean_loss(&params, held)));
    }
    for step in 0..config.schedule.total_steps {
        let batch: Vec<SftExample> = examples.by_ref().take(config.batch_size).collect();
        if batch.is_empty() {
            break;
        }
        let (loss, mut grad) = sft_batch_loss_grad(&params, &batch);
        let n = batch.len() as f64;
        grad.scale(1.0 / n);
        let lr = lr_at(step + 1, &config.schedule);
        match optimizer_step(&mut state, &mut params, &grad, lr) {
            Ok(_) => {}
            Err(Error::NonFiniteGradient) => log::warn!("sft step {step}: non-finite gradient, step skipped"),
            Err(e) => return Err(e),
        }
        train_loss.push(loss / n);
        if let Some(s) = sink.as_deref_mut() {
            s.metric(&SftMetricsRow { step, lr, loss: loss / n })?;
        }
        let done = step + 1;
        if !held.is_empty() && (done % config.eval_every.max(1) == 0 || done == config.schedule.total_steps) {
            let l = mean_loss(&params, held);
            log::info!("sft step {done}: train {:.4} held-out {:.4}", loss / n, l);
            heldout_loss.push((done, l));
        }
    }
    if let Some(s) = sink {
        s.checkpoint(&params)?;
    }
    Ok(SftOutcome { params, train_loss, heldout_loss })
}
