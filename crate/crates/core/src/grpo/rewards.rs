use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight given to the accepted (last) round's score in the generation reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalRoundWeight {
    /// `T - K + 1`.
    #[default]
    RemainingPlusOne,
    /// `T - K`, kept for ablation. Gives zero weight when `K = T`.
    Remaining,
}

/// `Σ_{i<K} qa_i + (T - K + 1) qa_K`.
pub fn gen_reward(per_round_qa: &[f64], rounds: usize) -> Result<f64> {
    gen_reward_with(per_round_qa, rounds, FinalRoundWeight::RemainingPlusOne)
}

pub fn gen_reward_with(per_round_qa: &[f64], rounds: usize, weight: FinalRoundWeight) -> Result<f64> {
    let k = per_round_qa.len();
    if k == 0 {
        return Err(Error::InvalidInput("generation reward needs at least one round".into()));
    }
    if k > rounds {
        return Err(Error::InvalidInput(format!("{k} rounds exceed the cap {rounds}")));
    }
    let last_weight = match weight {
        FinalRoundWeight::RemainingPlusOne => (rounds - k + 1) as f64,
        FinalRoundWeight::Remaining => (rounds - k) as f64,
    };
    let earlier: f64 = per_round_qa[..k - 1].iter().sum();
    Ok(earlier + last_weight * per_round_qa[k - 1])
}

/// `Σ_i (1 - |qa_i - se_i|) · T / K`.
pub fn comp_reward(per_round_qa: &[f64], se_flags: &[bool], rounds: usize) -> Result<f64> {
    let k = per_round_qa.len();
    if k != se_flags.len() {
        return Err(Error::InvalidInput(format!(
            "{k} QA scores but {} self-evaluations",
            se_flags.len()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidInput("comprehension reward needs at least one round".into()));
    }
    let agree: f64 = per_round_qa
        .iter()
        .zip(se_flags)
        .map(|(&qa, &se)| 1.0 - (qa - se as u8 as f64).abs())
        .sum();
    Ok(agree * rounds as f64 / k as f64)
}

/// `0.5 · flw + psv`.
pub fn edit_reward(flw: f64, psv: f64) -> f64 {
    0.5 * flw + psv
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub per_round_qa: Vec<f64>,
    pub se_flags: Vec<bool>,
    pub rounds: usize,
    pub r_gen: f64,
    pub r_comp: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn new(per_round_qa: Vec<f64>, se_flags: Vec<bool>, rounds: usize, weight: FinalRoundWeight) -> Result<Self> {
        let r_gen = gen_reward_with(&per_round_qa, rounds, weight)?;
        let r_comp = comp_reward(&per_round_qa, &se_flags, rounds)?;
        Ok(Self { per_round_qa, se_flags, rounds, r_gen, r_comp, total: r_gen + r_comp })
    }

    pub fn k(&self) -> usize {
        self.per_round_qa.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        assert!((gen_reward(&[0.4, 0.9], 3).unwrap() - 2.2).abs() < 1e-12);
        assert_eq!(gen_reward(&[1.0], 3).unwrap(), 3.0);
        assert_eq!(gen_reward(&[0.0, 0.0, 0.0], 3).unwrap(), 0.0);
        assert!((comp_reward(&[0.4, 0.9], &[false, true], 3).unwrap() - 2.25).abs() < 1e-12);
        assert_eq!(comp_reward(&[1.0], &[false], 3).unwrap(), 0.0);
        assert_eq!(edit_reward(1.0, 1.0), 1.5);
        assert_eq!(edit_reward(0.0, 1.0), 1.0);
        assert!((edit_reward(0.8, 0.6) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(gen_reward(&[], 3).is_err());
        assert!(gen_reward(&[0.1; 4], 3).is_err());
        assert!(comp_reward(&[0.1, 0.2], &[true], 3).is_err());
    }

    #[test]
    fn ablation_weight_drops_one() {
        let a = gen_reward_with(&[0.5, 1.0], 3, FinalRoundWeight::Remaining).unwrap();
        assert_eq!(a, 1.5);
        let b = gen_reward_with(&[0.5, 0.5, 1.0], 3, FinalRoundWeight::Remaining).unwrap();
        assert_eq!(b, 1.0);
    }
}
