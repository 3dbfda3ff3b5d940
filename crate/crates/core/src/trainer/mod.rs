//! Optimization: learning-rate schedule, AdamW with global-norm clipping,
//! reward-curve stability interventions, and the SFT / RL / editing loops.

mod edit_loop;
mod metrics;
mod optim;
mod rl_loop;
mod schedule;
mod sft_loop;
mod stability;

pub use edit_loop::{
    edit_examples, train_edit, train_edit_rl, train_edit_sft, EditMetricsRow, EditRlConfig, EditRlOutcome,
    EditSftConfig,
};
pub use metrics::{InterventionEvent, MetricsRow, RunSink, SftMetricsRow};
pub use optim::{clip_global_norm, optimizer_step, AdamConfig, OptimState};
pub use rl_loop::{train_prompt, train_rl, RlConfig, RlOutcome};
pub use schedule::{lr_at, ScheduleConfig};
pub use sft_loop::{build_sft_streams, train_sft, SftConfig, SftOutcome};
pub use stability::{ls_slope, stability_monitor, Intervention, StabilityPolicy, StabilityState};

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

/// Read a TOML config file; absent keys take their defaults.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), msg: e.to_string() })
}
