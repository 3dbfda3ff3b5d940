use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{InterventionEvent, RunSink};
use super::optim::{optimizer_step, AdamConfig, OptimState};
use super::schedule::{lr_at, ScheduleConfig};
use super::sft_loop::{train_on, SftConfig, SftOutcome};
use super::stability::{Intervention, StabilityPolicy, StabilityState};
use crate::error::{Error, Result};
use crate::grpo::{grpo_loss_grad, GrpoConfig, ScoredSample};
use crate::introspect::{edit_rollout_group, EditGroupRollout, EditRolloutConfig};
use crate::policy::PolicyParams;
use crate::rng;
use crate::sft::{build_edit_examples, filter_edit_pairs, gen_edit_pairs, SftExample};
use crate::world::EditTask;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EditSftConfig {
    pub seed: u64,
    pub raw_pairs: usize,
    /// Pairs are kept only if both edit scores reach this value.
    pub filter_threshold: f64,
    pub batch_size: usize,
    pub schedule: ScheduleConfig,
    pub optimizer: AdamConfig,
    pub prompt_dropout: f64,
}

impl Default for EditSftConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            raw_pairs: 300,
            filter_threshold: 0.7,
            batch_size: 32,
            schedule: ScheduleConfig::cosine(0.02, 0.002, 20, 300),
            optimizer: AdamConfig::default(),
            prompt_dropout: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EditRlConfig {
    pub seed: u64,
    /// Editing tasks per iteration.
    pub batch_size: usize,
    pub grpo: GrpoConfig,
    pub rollout: EditRolloutConfig,
    pub schedule: ScheduleConfig,
    pub optimizer: AdamConfig,
    pub stability: StabilityPolicy,
}

impl Default for EditRlConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            batch_size: 32,
            grpo: GrpoConfig { group_size: 8, rounds: 1, ..GrpoConfig::default() },
            rollout: EditRolloutConfig::default(),
            schedule: ScheduleConfig {
                peak_lr: 0.01,
                convert_lr: 0.004,
                min_lr: 0.001,
                warmup_steps: 10,
                convert_step: 40,
                total_steps: 400,
            },
            optimizer: AdamConfig::default(),
            stability: StabilityPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditMetricsRow {
    pub step: usize,
    pub lr: f64,
    pub beta: f64,
    pub mean_reward: f64,
    pub mean_flw: f64,
    pub mean_psv: f64,
    pub kl_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditRlOutcome {
    pub params: PolicyParams,
    pub metrics: Vec<EditMetricsRow>,
    pub events: Vec<InterventionEvent>,
}

/// Filtered editing-SFT examples of a run.
pub fn edit_examples(config: &EditSftConfig) -> Result<Vec<SftExample>> {
    let raw = gen_edit_pairs(config.raw_pairs, config.seed);
    let kept = filter_edit_pairs(&raw, config.filter_threshold)?;
    log::info!("edit sft: kept {} of {} raw pairs", kept.len(), raw.len());
    if kept.is_empty() {
        return Err(Error::EmptyStream("no editing pair passes the filter".into()));
    }
    Ok(build_edit_examples(&kept))
}

/// Supervised editing stage on filtered pairs, from `init` (zeros when absent).
pub fn train_edit_sft(
    config: &EditSftConfig,
    init: Option<PolicyParams>,
    sink: Option<&mut RunSink>,
) -> Result<SftOutcome> {
    let examples = edit_examples(config)?;
    let held = build_edit_examples(&filter_edit_pairs(
        &gen_edit_pairs(256, rng::derive(config.seed, &[0x4e1d])),
        config.filter_threshold,
    )?);
    let sft = SftConfig {
        seed: config.seed,
        batch_size: config.batch_size,
        schedule: config.schedule.clone(),
        optimizer: config.optimizer.clone(),
        ..SftConfig::default()
    };
    sft.schedule.validate()?;
    sft.optimizer.validate()?;
    let stream = crate::sft::mixed_sampler(
        [examples, Vec::new(), Vec::new()],
        crate::sft::MixConfig { ratios: [1.0, 0.0, 0.0], prompt_dropout: config.prompt_dropout },
        config.seed,
    )?;
    train_on(&sft, stream, &held, init, sink)
}

/// Training editing task `j` of iteration `it`.
fn train_task(seed: u64, it: usize, j: usize) -> EditTask {
    EditTask::generate(rng::derive(seed, &[rng::stream::EDIT_TRAIN, 0x5254, it as u64, j as u64]))
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// GRPO on single-round edits of unlabeled tasks.
pub fn train_edit_rl(config: &EditRlConfig, init: &PolicyParams, mut sink: Option<&mut RunSink>) -> Result<EditRlOutcome> {
    config.grpo.validate()?;
    config.schedule.validate()?;
    config.optimizer.validate()?;
    config.stability.validate()?;
    let mut theta = init.clone();
    let mut theta_ref = init.clone();
    let mut state = OptimState::new(config.optimizer.clone(), theta.len());
    let mut stab = StabilityState::new(config.grpo.beta);
    let mut history = Vec::new();
    let mut out = EditRlOutcome { params: theta.clone(), metrics: Vec::new(), events: Vec::new() };

    for it in 0..config.schedule.total_steps {
        let theta_old = &theta;
        let groups: Vec<EditGroupRollout> = (0..config.batch_size)
            .into_par_iter()
            .map(|j| {
                let task = train_task(config.seed, it, j);
                let seed = rng::derive(config.seed, &[rng::stream::ROLLOUT, 0x4544, it as u64, j as u64]);
                edit_rollout_group(theta_old, &task.source, &task.instr, &config.grpo, &config.rollout, seed)
            })
            .collect::<Result<_>>()?;
        let samples: Vec<ScoredSample> = groups.iter().flat_map(EditGroupRollout::scored_samples).collect();
        let grpo = GrpoConfig { beta: stab.beta, ..config.grpo.clone() };
        let (_, mut grad, stats) = grpo_loss_grad(&samples, &theta, &theta_ref, &grpo)?;
        grad.scale(-1.0);
        let lr = lr_at(it + 1, &config.schedule) * stab.lr_scale;
        match optimizer_step(&mut state, &mut theta, &grad, lr) {
            Ok(_) => {}
            Err(Error::NonFiniteGradient) => log::warn!("edit rl iteration {it}: non-finite gradient, step skipped"),
            Err(e) => return Err(e),
        }
        let all = || groups.iter().flat_map(|g| g.samples.iter());
        let row = EditMetricsRow {
            step: it,
            lr,
            beta: stab.beta,
            mean_reward: mean(all().map(|s| s.reward)),
            mean_flw: mean(all().map(|s| s.flw)),
            mean_psv: mean(all().map(|s| s.psv)),
            kl_mean: stats.kl_mean,
        };
        if it % 10 == 0 {
            log::info!(
                "edit rl iteration {it}: reward {:.3} flw {:.3} psv {:.3} kl {:.4}",
                row.mean_reward,
                row.mean_flw,
                row.mean_psv,
                row.kl_mean
            );
        }
        if let Some(s) = sink.as_deref_mut() {
            s.metric(&row)?;
        }
        history.push(row.mean_reward);
        out.metrics.push(row);
        let action = stab.update(it, &history, &config.stability);
        if action != Intervention::None {
            if action == Intervention::RefreshRef {
                theta_ref = theta.clone();
            }
            let w = config.stability.sharp_window.min(history.len());
            let event = InterventionEvent {
                step: it,
                kind: action,
                lr_scale: stab.lr_scale,
                beta: stab.beta,
                reward_window_mean: mean(history[history.len() - w..].iter().copied()),
            };
            if let Some(s) = sink.as_deref_mut() {
                s.event(&event)?;
            }
            out.events.push(event);
        }
    }
    if let Some(s) = sink {
        s.checkpoint(&theta)?;
    }
    out.params = theta;
    Ok(out)
}

/// Editing SFT followed by editing RL.
pub fn train_edit(
    sft: &EditSftConfig,
    rl: &EditRlConfig,
    init: Option<PolicyParams>,
) -> Result<(SftOutcome, EditRlOutcome)> {
    let s = train_edit_sft(sft, init, None)?;
    let r = train_edit_rl(rl, &s.params, None)?;
    Ok((s, r))
}
