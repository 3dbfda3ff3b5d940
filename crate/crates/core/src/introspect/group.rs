use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{run_episode, EpisodeConfig, EpisodeMode, Trajectory, Verdict};
use crate::error::Result;
use crate::grpo::{group_advantages, GrpoConfig, RewardBreakdown, ScoredSample};
use crate::policy::Policy;
use crate::rng;
use crate::world::PromptSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRollout {
    pub prompt: PromptSpec,
    pub trajectories: Vec<Trajectory>,
    pub rewards: Vec<RewardBreakdown>,
    pub advantages: Vec<f64>,
}

impl GroupRollout {
    pub fn scored_samples(&self) -> Vec<ScoredSample> {
        self.trajectories
            .iter()
            .zip(&self.advantages)
            .map(|(t, &a)| ScoredSample { segments: t.segments(), advantage: a })
            .collect()
    }

    pub fn audit_records(&self) -> Vec<RewardRecord> {
        self.rewards
            .iter()
            .zip(&self.advantages)
            .map(|(r, &a)| RewardRecord {
                prompt_id: self.prompt.id,
                k: r.k(),
                per_round_qa: r.per_round_qa.clone(),
                se_flags: r.se_flags.clone(),
                r_gen: r.r_gen,
                r_comp: r.r_comp,
                total: r.total,
                advantage: a,
            })
            .collect()
    }
}

/// One JSON-lines reward audit record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub prompt_id: u64,
    #[serde(rename = "K")]
    pub k: usize,
    pub per_round_qa: Vec<f64>,
    pub se_flags: Vec<bool>,
    pub r_gen: f64,
    pub r_comp: f64,
    pub total: f64,
    pub advantage: f64,
}

/// Run `G` independent episodes under the old policy and score them.
/// Member `i` uses seed `derive(seed, [i])`.
pub fn rollout_group<P: Policy + ?Sized>(
    policy_old: &P,
    prompt: &PromptSpec,
    grpo: &GrpoConfig,
    episode: &EpisodeConfig,
    seed: u64,
) -> Result<GroupRollout> {
    grpo.validate()?;
    let episode = EpisodeConfig { rounds: grpo.rounds, ..episode.clone() };
    let trajectories: Vec<Trajectory> = (0..grpo.group_size as u64)
        .into_par_iter()
        .map(|i| run_episode(policy_old, prompt, &episode, rng::derive(seed, &[i]), EpisodeMode::Rollout))
        .collect();
    let rewards = trajectories
        .iter()
        .map(|t| {
            let qa = t.rounds.iter().map(|r| r.qa.expect("rollout mode scores rounds")).collect();
            let se = t.rounds.iter().map(|r| r.verdict == Verdict::Yes).collect();
            RewardBreakdown::new(qa, se, grpo.rounds, grpo.final_weight)
        })
        .collect::<Result<Vec<_>>>()?;
    let totals: Vec<f64> = rewards.iter().map(|r| r.total).collect();
    let advantages = group_advantages(&totals, grpo.std_floor);
    Ok(GroupRollout { prompt: prompt.clone(), trajectories, rewards, advantages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grpo::gen_reward;
    use crate::policy::random_params;
    use crate::world::{gen_prompt, qa_score, Category};

    #[test]
    fn rewards_and_advantages_recompute_from_the_trajectories() {
        let p = random_params(6, 0.5);
        let prompt = gen_prompt(Category::Counting, 4);
        let grpo = GrpoConfig::default();
        let g = rollout_group(&p, &prompt, &grpo, &EpisodeConfig::default(), 21).unwrap();
        assert_eq!(g.trajectories.len(), grpo.group_size);
        for (t, r) in g.trajectories.iter().zip(&g.rewards) {
            let qa: Vec<f64> = t.rounds.iter().map(|r| qa_score(&prompt, &r.image)).collect();
            assert_eq!(r.per_round_qa, qa);
            assert!((r.r_gen - gen_reward(&qa, grpo.rounds).unwrap()).abs() < 1e-12);
            assert!(t.k() <= grpo.rounds);
        }
        let totals: Vec<f64> = g.rewards.iter().map(|r| r.total).collect();
        assert_eq!(g.advantages, group_advantages(&totals, grpo.std_floor));
        let audit = g.audit_records();
        assert_eq!(audit.len(), grpo.group_size);
        assert_eq!(audit[2].advantage, g.advantages[2]);
        let samples = g.scored_samples();
        assert!(samples.iter().all(|s| s.segments.iter().all(|seg| seg.old_logprobs.is_some())));
    }

    #[test]
    fn group_is_reproducible() {
        let p = random_params(6, 0.5);
        let prompt = gen_prompt(Category::Position, 4);
        let grpo = GrpoConfig::default();
        let a = rollout_group(&p, &prompt, &grpo, &EpisodeConfig::default(), 5).unwrap();
        let b = rollout_group(&p, &prompt, &grpo, &EpisodeConfig::default(), 5).unwrap();
        assert_eq!(a.trajectories, b.trajectories);
        assert_eq!(a.advantages, b.advantages);
    }
}
