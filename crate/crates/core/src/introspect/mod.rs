//! The multi-round introspective episode: generate an image, self-evaluate,
//! stop on `YES` or regenerate on `NO`, up to a round cap.

mod edit;
mod episode;
mod group;

pub use edit::{edit_rollout_group, EditGroupRollout, EditRewardMode, EditRolloutConfig, EditSample};
pub use episode::{
    final_image, first_image, run_episode, EpisodeConfig, EpisodeMode, RoundRecord, StopReason, TextDecoding,
    Trajectory, TrajectoryDump, Verdict,
};
pub use group::{rollout_group, GroupRollout, RewardRecord};
