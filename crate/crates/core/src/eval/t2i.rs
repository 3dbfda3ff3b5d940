use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::suite::EvalSuite;
use crate::introspect::{run_episode, EpisodeConfig, EpisodeMode, TextDecoding, Trajectory};
use crate::policy::Policy;
use crate::rng;
use crate::world::{qa_score, Category};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AhaMode {
    WithAha,
    WithoutAha,
    Both,
}

impl AhaMode {
    pub fn with(self) -> bool {
        matches!(self, AhaMode::WithAha | AhaMode::Both)
    }

    pub fn without(self) -> bool {
        matches!(self, AhaMode::WithoutAha | AhaMode::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptResult {
    pub prompt_id: u64,
    pub category: Category,
    pub qa_first: f64,
    pub qa_final: f64,
    pub rounds: usize,
}

/// Category means keyed by category name, their unweighted mean, and rounds used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T2iScores {
    pub per_category: BTreeMap<String, f64>,
    pub overall: f64,
    pub mean_rounds: f64,
}

impl T2iScores {
    fn aggregate(results: &[PromptResult], qa: impl Fn(&PromptResult) -> f64, rounds: impl Fn(&PromptResult) -> usize) -> Self {
        let mut per_category = BTreeMap::new();
        for c in Category::ALL {
            let xs: Vec<f64> = results.iter().filter(|r| r.category == c).map(&qa).collect();
            let m = if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
            per_category.insert(c.name().to_string(), m);
        }
        let overall = per_category.values().sum::<f64>() / Category::ALL.len() as f64;
        let mean_rounds = if results.is_empty() {
            0.0
        } else {
            results.iter().map(|r| rounds(r) as f64).sum::<f64>() / results.len() as f64
        };
        Self { per_category, overall, mean_rounds }
    }

    pub fn category(&self, c: Category) -> f64 {
        self.per_category[c.name()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T2iFragment {
    pub mode: AhaMode,
    pub results: Vec<PromptResult>,
    pub with_aha: Option<T2iScores>,
    pub without_aha: Option<T2iScores>,
    pub trajectories: Vec<Trajectory>,
}

/// Score the suite's prompts. Prompt `i` runs with seed
/// `derive(seed, [EVAL_EPISODES, i])` in every mode, so the round-1 image is
/// shared between with-aha and without-aha. Verdicts are decoded greedily.
pub fn eval_t2i<P: Policy + ?Sized>(
    policy: &P,
    suite: &EvalSuite,
    mode: AhaMode,
    episode: &EpisodeConfig,
    seed: u64,
) -> T2iFragment {
    let cfg = EpisodeConfig {
        text_decoding: TextDecoding::Greedy,
        rounds: if mode.with() { episode.rounds } else { 1 },
        ..episode.clone()
    };
    let trajectories: Vec<Trajectory> = suite
        .prompts
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let s = rng::derive(seed, &[rng::stream::EVAL_EPISODES, i as u64]);
            run_episode(policy, p, &cfg, s, EpisodeMode::Inference)
        })
        .collect();
    let results: Vec<PromptResult> = trajectories
        .iter()
        .map(|t| PromptResult {
            prompt_id: t.prompt.id,
            category: t.prompt.category,
            qa_first: qa_score(&t.prompt, &t.rounds[0].image),
            qa_final: qa_score(&t.prompt, &t.rounds.last().unwrap().image),
            rounds: t.k(),
        })
        .collect();
    let with_aha = mode.with().then(|| T2iScores::aggregate(&results, |r| r.qa_final, |r| r.rounds));
    let without_aha = mode.without().then(|| T2iScores::aggregate(&results, |r| r.qa_first, |_| 1));
    T2iFragment { mode, results, with_aha, without_aha, trajectories }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::random_params;
    use crate::policy::scripted::{ImageScript, JudgeScript, ScriptedPolicy};

    #[test]
    fn always_yes_makes_both_modes_agree() {
        let suite = EvalSuite::generate(5, 0, 1);
        let p = ScriptedPolicy::new(ImageScript::Learned(random_params(1, 0.4)), JudgeScript::AlwaysYes);
        let f = eval_t2i(&p, &suite, AhaMode::Both, &EpisodeConfig::default(), 2);
        let (w, wo) = (f.with_aha.unwrap(), f.without_aha.unwrap());
        assert_eq!(w.per_category, wo.per_category);
        assert_eq!(w.mean_rounds, 1.0);
        assert_eq!(f.results.len(), 30);
    }

    #[test]
    fn first_round_is_shared_between_modes() {
        let suite = EvalSuite::generate(4, 0, 1);
        let p = ScriptedPolicy::new(ImageScript::Learned(random_params(1, 0.4)), JudgeScript::AlwaysNo);
        let both = eval_t2i(&p, &suite, AhaMode::Both, &EpisodeConfig::default(), 2);
        let alone = eval_t2i(&p, &suite, AhaMode::WithoutAha, &EpisodeConfig::default(), 2);
        assert_eq!(both.without_aha, alone.without_aha);
        assert!(alone.with_aha.is_none());
        assert!(alone.trajectories.iter().all(|t| t.k() == 1));
        assert_eq!(both.with_aha.unwrap().mean_rounds, 3.0);
    }

    #[test]
    fn overall_is_the_unweighted_category_mean() {
        let results = vec![
            PromptResult { prompt_id: 0, category: Category::Color, qa_first: 1.0, qa_final: 1.0, rounds: 1 },
            PromptResult { prompt_id: 1, category: Category::Color, qa_first: 0.0, qa_final: 1.0, rounds: 2 },
            PromptResult { prompt_id: 2, category: Category::Counting, qa_first: 0.5, qa_final: 0.5, rounds: 3 },
        ];
        let s = T2iScores::aggregate(&results, |r| r.qa_first, |r| r.rounds);
        assert_eq!(s.category(Category::Color), 0.5);
        assert_eq!(s.category(Category::Counting), 0.5);
        assert_eq!(s.category(Category::Position), 0.0);
        assert!((s.overall - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(s.mean_rounds, 2.0);
    }
}
