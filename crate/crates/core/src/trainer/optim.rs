use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::PolicyParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub grad_clip: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.95, eps: 1e-6, weight_decay: 0.05, grad_clip: 1.0 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0
            && self.grad_clip > 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid optimizer settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub config: AdamConfig,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
}

impl OptimState {
    pub fn new(config: AdamConfig, num_params: usize) -> Self {
        Self { config, first_moment: vec![0.0; num_params], second_moment: vec![0.0; num_params], step: 0 }
    }
}

/// Scale `grad` in place to global norm at most `max_norm`; returns the norm before clipping.
pub fn clip_global_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// One descent step on `grad` (the gradient of a loss to minimize).
/// Decoupled decay is applied before the moment update. Returns the
/// pre-clip gradient norm. A non-finite gradient leaves everything untouched.
pub fn optimizer_step(state: &mut OptimState, params: &mut PolicyParams, grad: &PolicyParams, lr: f64) -> Result<f64> {
    if grad.len() != params.len() || state.first_moment.len() != params.len() {
        return Err(Error::InvalidInput("optimizer shapes do not match".into()));
    }
    if !grad.is_finite() {
        return Err(Error::NonFiniteGradient);
    }
    let c = &state.config;
    let mut g = grad.flat().to_vec();
    let norm = clip_global_norm(&mut g, c.grad_clip);
    state.step += 1;
    let bc1 = 1.0 - c.beta1.powi(state.step as i32);
    let bc2 = 1.0 - c.beta2.powi(state.step as i32);
    let decay = 1.0 - lr * c.weight_decay;
    for (((p, m), v), gi) in params
        .flat_mut()
        .iter_mut()
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
        .zip(&g)
    {
        *p *= decay;
        *m = c.beta1 * *m + (1.0 - c.beta1) * gi;
        *v = c.beta2 * *v + (1.0 - c.beta2) * gi * gi;
        *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + c.eps);
    }
    Ok(norm)
}
