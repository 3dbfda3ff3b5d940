//! Bi-level rewards, group-relative advantages, and the clipped GRPO
//! objective with a per-token KL penalty.

mod advantage;
mod loss;
mod rewards;

pub use advantage::group_advantages;
pub use loss::{grpo_loss_grad, kl_token, replay_old_logprobs, token_ratio, LossStats, RolloutSegment, ScoredSample};
pub use rewards::{comp_reward, edit_reward, gen_reward, gen_reward_with, FinalRoundWeight, RewardBreakdown};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrpoConfig {
    pub clip_eps: f64,
    pub beta: f64,
    pub group_size: usize,
    pub rounds: usize,
    pub std_floor: f64,
    pub final_weight: FinalRoundWeight,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            clip_eps: 0.2,
            beta: 0.05,
            group_size: 7,
            rounds: 3,
            std_floor: 1e-8,
            final_weight: FinalRoundWeight::RemainingPlusOne,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        // An infinite clip range is allowed: it disables clipping.
        if !(self.clip_eps > 0.0 && (self.clip_eps < 1.0 || self.clip_eps == f64::INFINITY)) {
            return Err(Error::Config(format!("clip_eps {} outside (0, 1)", self.clip_eps)));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::Config(format!("beta {} is negative", self.beta)));
        }
        if self.group_size < 2 {
            return Err(Error::Config("group_size must be at least 2".into()));
        }
        if self.rounds < 1 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        Ok(())
    }
}
