use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tasks::SftExample;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixConfig {
    pub ratios: [f64; 3],
    pub prompt_dropout: f64,
}

impl Default for MixConfig {
    fn default() -> Self {
        Self { ratios: [0.2, 0.3, 0.5], prompt_dropout: 0.1 }
    }
}

impl MixConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ratios.iter().any(|&r| !(r >= 0.0)) || (self.ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("mix ratios {:?} must be non-negative and sum to 1", self.ratios)));
        }
        if !(0.0..=1.0).contains(&self.prompt_dropout) {
            return Err(Error::Config(format!("prompt_dropout {} outside [0, 1]", self.prompt_dropout)));
        }
        Ok(())
    }
}

struct Stream {
    examples: Vec<SftExample>,
    order: Vec<usize>,
    pos: usize,
}

/// Endless draws from the task streams in the configured ratios.
pub struct MixedSampler {
    streams: Vec<Stream>,
    config: MixConfig,
    rng: rng::Rng,
}

impl MixedSampler {
    fn next_of(&mut self, task: usize) -> SftExample {
        let s = &mut self.streams[task];
        if s.pos == s.order.len() {
            log::debug!("task stream {task} exhausted, reshuffling");
            s.order.shuffle(&mut self.rng);
            s.pos = 0;
        }
        let ex = s.examples[s.order[s.pos]].clone();
        s.pos += 1;
        ex
    }
}

impl Iterator for MixedSampler {
    type Item = SftExample;

    fn next(&mut self) -> Option<SftExample> {
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        let mut task = 2;
        for (i, &r) in self.config.ratios.iter().enumerate() {
            acc += r;
            if u < acc && r > 0.0 {
                task = i;
                break;
            }
        }
        while self.config.ratios[task] == 0.0 {
            task -= 1;
        }
        let mut ex = self.next_of(task);
        if self.rng.random_bool(self.config.prompt_dropout) {
            ex.context.pad = true;
        }
        Some(ex)
    }
}

pub fn mixed_sampler(streams: [Vec<SftExample>; 3], config: MixConfig, seed: u64) -> Result<MixedSampler> {
    config.validate()?;
    let mut r = rng::rng(rng::derive(seed, &[rng::stream::SAMPLER]));
    let mut out = Vec::with_capacity(3);
    for (i, examples) in streams.into_iter().enumerate() {
        if examples.is_empty() && config.ratios[i] > 0.0 {
            return Err(Error::EmptyStream(format!("task stream {i} is empty but has ratio {}", config.ratios[i])));
        }
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut r);
        out.push(Stream { examples, order, pos: 0 });
    }
    Ok(MixedSampler { streams: out, config, rng: r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Context;
    use crate::sft::tasks::{SftTarget, SftTask};
    use crate::world::{gen_prompt, Category, GridImage};

    fn stream(task: SftTask, n: usize) -> Vec<SftExample> {
        (0..n)
            .map(|i| SftExample {
                task,
                context: Context::image(gen_prompt(Category::Color, i as u64), Vec::new()),
                target: SftTarget::Image(GridImage::empty()),
            })
            .collect()
    }

    #[test]
    fn draws_follow_the_ratios_and_dropout() {
        let streams = [stream(SftTask::I, 5), stream(SftTask::II, 7), stream(SftTask::III, 3)];
        let n = 40_000;
        let draws: Vec<SftExample> = mixed_sampler(streams, MixConfig::default(), 9).unwrap().take(n).collect();
        let frac = |t: SftTask| draws.iter().filter(|e| e.task == t).count() as f64 / n as f64;
        assert!((frac(SftTask::I) - 0.2).abs() < 0.01);
        assert!((frac(SftTask::II) - 0.3).abs() < 0.01);
        assert!((frac(SftTask::III) - 0.5).abs() < 0.01);
        let pad = draws.iter().filter(|e| e.context.pad).count() as f64 / n as f64;
        assert!((pad - 0.1).abs() < 0.01);
    }

    #[test]
    fn every_example_is_seen_once_per_pass() {
        let config = MixConfig { ratios: [1.0, 0.0, 0.0], prompt_dropout: 0.0 };
        let s = mixed_sampler([stream(SftTask::I, 6), Vec::new(), Vec::new()], config, 1).unwrap();
        let mut ids: Vec<u64> = s.take(12).map(|e| e.context.prompt().unwrap().id).collect();
        ids[..6].sort();
        ids[6..].sort();
        assert_eq!(ids[..6], ids[6..]);
    }

    #[test]
    fn empty_stream_with_weight_is_rejected() {
        let r = mixed_sampler([stream(SftTask::I, 2), Vec::new(), stream(SftTask::III, 2)], MixConfig::default(), 0);
        assert!(matches!(r, Err(Error::EmptyStream(_))));
        let bad = MixConfig { ratios: [0.5, 0.5, 0.5], prompt_dropout: 0.1 };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn same_seed_same_draws() {
        let mk = || mixed_sampler([stream(SftTask::I, 4), stream(SftTask::II, 4), stream(SftTask::III, 4)], MixConfig::default(), 3).unwrap();
        let a: Vec<SftExample> = mk().take(50).collect();
        let b: Vec<SftExample> = mk().take(50).collect();
        assert_eq!(a, b);
    }
}
