use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Intervention {
    None,
    CutLr,
    CutBeta,
    RefreshRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilityPolicy {
    pub enabled: bool,
    /// Fractional drop of the last-window mean against the window before it.
    pub sharp_drop_threshold: f64,
    pub sharp_window: usize,
    pub gradual_window: usize,
    pub lr_cut_factor: f64,
    pub beta_cut_factor: f64,
    /// `beta` is never cut below this fraction of its initial value.
    pub beta_floor_fraction: f64,
    pub min_steps_before_ref_refresh: usize,
    /// Iterations after an intervention during which the monitor stays quiet.
    pub cooldown: usize,
}

impl Default for StabilityPolicy {
    fn default() -> Self {
        Self {
            enabled: true,
            sharp_drop_threshold: 0.3,
            sharp_window: 20,
            gradual_window: 50,
            lr_cut_factor: 0.5,
            beta_cut_factor: 0.5,
            beta_floor_fraction: 0.125,
            min_steps_before_ref_refresh: 100,
            cooldown: 50,
        }
    }
}

impl StabilityPolicy {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !(unit(self.sharp_drop_threshold)
            && unit(self.lr_cut_factor)
            && unit(self.beta_cut_factor)
            && self.beta_floor_fraction > 0.0
            && self.beta_floor_fraction <= 1.0
            && self.sharp_window >= 2
            && self.gradual_window >= 2)
        {
            return Err(Error::Config(format!("invalid stability policy {self:?}")));
        }
        Ok(())
    }
}

/// Ordinary least-squares slope of `ys` against `0, 1, ...`.
pub fn ls_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        num += dx * (y - my);
        den += dx * dx;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Decide an intervention from the reward history (oldest first).
pub fn stability_monitor(history: &[f64], policy: &StabilityPolicy, steps_since_ref_refresh: usize) -> Intervention {
    let ws = policy.sharp_window;
    if history.len() >= 2 * ws {
        let n = history.len();
        let last = mean(&history[n - ws..]);
        let prior = mean(&history[n - 2 * ws..n - ws]);
        if prior > 0.0 && last < (1.0 - policy.sharp_drop_threshold) * prior {
            return Intervention::CutLr;
        }
    }
    let wg = policy.gradual_window;
    if history.len() >= wg && ls_slope(&history[history.len() - wg..]) < 0.0 {
        return if steps_since_ref_refresh < policy.min_steps_before_ref_refresh {
            Intervention::CutBeta
        } else {
            Intervention::RefreshRef
        };
    }
    Intervention::None
}

/// Running state of the automated interventions.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityState {
    pub lr_scale: f64,
    pub beta: f64,
    pub initial_beta: f64,
    pub steps_since_refresh: usize,
    pub quiet_until: usize,
}

impl StabilityState {
    pub fn new(beta: f64) -> Self {
        Self { lr_scale: 1.0, beta, initial_beta: beta, steps_since_refresh: 0, quiet_until: 0 }
    }

    /// Consult the monitor after iteration `step` and apply its decision to the
    /// learning-rate scale and `beta`. The caller refreshes the reference on
    /// [`Intervention::RefreshRef`].
    pub fn update(&mut self, step: usize, history: &[f64], policy: &StabilityPolicy) -> Intervention {
        self.steps_since_refresh += 1;
        if !policy.enabled || step < self.quiet_until {
            return Intervention::None;
        }
        let action = stability_monitor(history, policy, self.steps_since_refresh);
        match action {
            Intervention::None => return action,
            Intervention::CutLr => self.lr_scale *= policy.lr_cut_factor,
            Intervention::CutBeta => {
                let floor = self.initial_beta * policy.beta_floor_fraction;
                self.beta = (self.beta * policy.beta_cut_factor).max(floor);
            }
            Intervention::RefreshRef => self.steps_since_refresh = 0,
        }
        self.quiet_until = step + 1 + policy.cooldown;
        action
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(ws: usize, wg: usize) -> StabilityPolicy {
        StabilityPolicy { sharp_window: ws, gradual_window: wg, ..StabilityPolicy::default() }
    }

    #[test]
    fn increasing_history_needs_nothing() {
        let h: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(stability_monitor(&h, &StabilityPolicy::default(), 500), Intervention::None);
    }

    #[test]
    fn sharp_drop_cuts_lr() {
        let h = [3.0, 3.0, 3.0, 3.0, 1.5, 1.4];
        assert_eq!(stability_monitor(&h, &small(2, 6), 0), Intervention::CutLr);
    }

    #[test]
    fn slow_decline_refreshes_reference_when_allowed() {
        let h: Vec<f64> = (0..50).map(|i| 2.0 - 0.001 * i as f64).collect();
        let p = StabilityPolicy::default();
        assert_eq!(stability_monitor(&h, &p, 1000), Intervention::RefreshRef);
        assert_eq!(stability_monitor(&h, &p, 10), Intervention::CutBeta);
    }

    #[test]
    fn slope_of_line() {
        let ys: Vec<f64> = (0..10).map(|i| 3.0 - 0.5 * i as f64).collect();
        assert!((ls_slope(&ys) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn beta_floor_holds() {
        let p = StabilityPolicy { cooldown: 0, ..small(2, 4) };
        let mut st = StabilityState::new(0.08);
        let h = [1.0, 0.99, 0.98, 0.97];
        for step in 0..10 {
            st.update(step, &h, &p);
        }
        assert!((st.beta - 0.01).abs() < 1e-15);
    }
}
