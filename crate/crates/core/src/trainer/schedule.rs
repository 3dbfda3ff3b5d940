use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear warmup, linear drop to a convert rate, then cosine decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub peak_lr: f64,
    pub convert_lr: f64,
    pub min_lr: f64,
    pub warmup_steps: usize,
    pub convert_step: usize,
    pub total_steps: usize,
}

impl ScheduleConfig {
    /// Warmup then a plain cosine from `peak_lr` to `min_lr`.
    pub fn cosine(peak_lr: f64, min_lr: f64, warmup_steps: usize, total_steps: usize) -> Self {
        Self { peak_lr, convert_lr: peak_lr, min_lr, warmup_steps, convert_step: warmup_steps, total_steps }
    }

    /// `warmup_steps == convert_step` is accepted and skips the linear drop.
    pub fn validate(&self) -> Result<()> {
        if !(self.min_lr >= 0.0 && self.min_lr <= self.convert_lr && self.convert_lr <= self.peak_lr) {
            return Err(Error::Config(format!(
                "need 0 <= min_lr <= convert_lr <= peak_lr, got {} / {} / {}",
                self.min_lr, self.convert_lr, self.peak_lr
            )));
        }
        if !(self.warmup_steps <= self.convert_step && self.convert_step < self.total_steps) {
            return Err(Error::Config(format!(
                "need warmup_steps <= convert_step < total_steps, got {} / {} / {}",
                self.warmup_steps, self.convert_step, self.total_steps
            )));
        }
        Ok(())
    }
}

pub fn lr_at(step: usize, s: &ScheduleConfig) -> f64 {
    let step = step.min(s.total_steps);
    if step <= s.warmup_steps {
        if s.warmup_steps == 0 {
            return s.peak_lr;
        }
        return s.peak_lr * step as f64 / s.warmup_steps as f64;
    }
    if step <= s.convert_step {
        let f = (step - s.warmup_steps) as f64 / (s.convert_step - s.warmup_steps) as f64;
        return s.convert_lr + (s.peak_lr - s.convert_lr) * (1.0 - f);
    }
    let f = (step - s.convert_step) as f64 / (s.total_steps - s.convert_step) as f64;
    s.min_lr + 0.5 * (s.convert_lr - s.min_lr) * (1.0 + (std::f64::consts::PI * f).cos())
}
