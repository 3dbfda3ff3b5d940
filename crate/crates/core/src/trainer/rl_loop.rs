use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{InterventionEvent, MetricsRow, RunSink};
use super::optim::{optimizer_step, AdamConfig, OptimState};
use super::schedule::{lr_at, ScheduleConfig};
use super::stability::{Intervention, StabilityPolicy, StabilityState};
use crate::error::{Error, Result};
use crate::grpo::{grpo_loss_grad, GrpoConfig, ScoredSample};
use crate::introspect::{rollout_group, EpisodeConfig, GroupRollout};
use crate::policy::PolicyParams;
use crate::rng;
use crate::world::{gen_prompt, Category, PromptSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RlConfig {
    pub seed: u64,
    /// Prompts per iteration.
    pub batch_size: usize,
    pub grpo: GrpoConfig,
    pub episode: EpisodeConfig,
    pub schedule: ScheduleConfig,
    pub optimizer: AdamConfig,
    pub stability: StabilityPolicy,
    /// Write every trajectory's reward breakdown to `rewards.jsonl`.
    pub audit_rewards: bool,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            batch_size: 32,
            grpo: GrpoConfig::default(),
            episode: EpisodeConfig::default(),
            schedule: ScheduleConfig {
                peak_lr: 0.005,
                convert_lr: 0.002,
                min_lr: 0.0005,
                warmup_steps: 10,
                convert_step: 40,
                total_steps: 300,
            },
            optimizer: AdamConfig::default(),
            stability: StabilityPolicy::default(),
            audit_rewards: false,
        }
    }
}

impl RlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        self.grpo.validate()?;
        self.schedule.validate()?;
        self.optimizer.validate()?;
        self.stability.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlOutcome {
    pub params: PolicyParams,
    pub reference: PolicyParams,
    pub metrics: Vec<MetricsRow>,
    /// Per-iteration mean number of rounds used.
    pub mean_rounds: Vec<f64>,
    pub objectives: Vec<f64>,
    pub events: Vec<InterventionEvent>,
}

/// Training prompt `j` of iteration `it`; categories cycle with `j`.
pub fn train_prompt(seed: u64, it: usize, j: usize) -> PromptSpec {
    let s = rng::derive(seed, &[rng::stream::TRAIN_PROMPTS, it as u64, j as u64]);
    gen_prompt(Category::ALL[j % Category::ALL.len()], s)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// GRPO over introspective episodes, starting from `init` as both policy and reference.
pub fn train_rl(config: &RlConfig, init: &PolicyParams, mut sink: Option<&mut RunSink>) -> Result<RlOutcome> {
    config.validate()?;
    let mut theta = init.clone();
    let mut theta_ref = init.clone();
    let mut state = OptimState::new(config.optimizer.clone(), theta.len());
    let mut stab = StabilityState::new(config.grpo.beta);
    let mut history = Vec::new();
    let mut out = RlOutcome {
        params: theta.clone(),
        reference: theta_ref.clone(),
        metrics: Vec::new(),
        mean_rounds: Vec::new(),
        objectives: Vec::new(),
        events: Vec::new(),
    };

    for it in 0..config.schedule.total_steps {
        // The on-policy contract: rollouts come from the current parameters.
        let theta_old = &theta;
        let groups: Vec<GroupRollout> = (0..config.batch_size)
            .into_par_iter()
            .map(|j| {
                let prompt = train_prompt(config.seed, it, j);
                let seed = rng::derive(config.seed, &[rng::stream::ROLLOUT, it as u64, j as u64]);
                rollout_group(theta_old, &prompt, &config.grpo, &config.episode, seed)
            })
            .collect::<Result<_>>()?;
        let samples: Vec<ScoredSample> = groups.iter().flat_map(GroupRollout::scored_samples).collect();
        let grpo = GrpoConfig { beta: stab.beta, ..config.grpo.clone() };
        let (objective, mut grad, stats) = grpo_loss_grad(&samples, &theta, &theta_ref, &grpo)?;
        grad.scale(-1.0);
        let lr = lr_at(it + 1, &config.schedule) * stab.lr_scale;
        match optimizer_step(&mut state, &mut theta, &grad, lr) {
            Ok(_) => {}
            Err(Error::NonFiniteGradient) => log::warn!("rl iteration {it}: non-finite gradient, step skipped"),
            Err(e) => return Err(e),
        }

        let trajs = || groups.iter().flat_map(|g| g.trajectories.iter());
        let row = MetricsRow {
            step: it,
            lr,
            beta: stab.beta,
            mean_reward: mean(groups.iter().flat_map(|g| g.rewards.iter().map(|r| r.total))),
            mean_qa_final: mean(trajs().map(|t| t.rounds.last().unwrap().qa.unwrap())),
            mean_qa_first: mean(trajs().map(|t| t.rounds[0].qa.unwrap())),
            kl_mean: stats.kl_mean,
        };
        out.mean_rounds.push(mean(trajs().map(|t| t.k() as f64)));
        out.objectives.push(objective);
        if it % 10 == 0 {
            log::info!(
                "rl iteration {it}: reward {:.3} qa_final {:.3} qa_first {:.3} rounds {:.3} kl {:.4}",
                row.mean_reward,
                row.mean_qa_final,
                row.mean_qa_first,
                out.mean_rounds.last().unwrap(),
                row.kl_mean
            );
        }
        if let Some(s) = sink.as_deref_mut() {
            s.metric(&row)?;
            if config.audit_rewards {
                for g in &groups {
                    for rec in g.audit_records() {
                        s.audit(&rec)?;
                    }
                }
            }
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
            log::info!("rl iteration {it}: intervention {action:?}");
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
    out.reference = theta_ref;
    Ok(out)
}
