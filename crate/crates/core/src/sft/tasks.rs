use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use super::corpus::{CorpusEntry, ScoredImage};
use crate::error::{Error, Result};
use crate::policy::{text_vocab, Context, PriorRound};
use crate::rng;
use crate::world::{GridImage, ReasonCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SftTask {
    /// Text-to-image.
    I,
    /// Self-evaluation.
    II,
    /// Regeneration after rejected rounds.
    III,
    /// Instruction-guided editing.
    Edit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SftTarget {
    Image(GridImage),
    Text { yes: bool, reason: Vec<ReasonCode> },
}

impl SftTarget {
    /// Tokens of the target segment; text targets end with `EOS`.
    pub fn tokens(&self) -> Vec<u8> {
        match self {
            SftTarget::Image(g) => g.ids().to_vec(),
            SftTarget::Text { yes, reason } => {
                let mut t = vec![if *yes { text_vocab::YES } else { text_vocab::NO }];
                t.extend(reason.iter().map(|&c| text_vocab::reason(c)));
                t.push(text_vocab::EOS);
                t
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftExample {
    pub task: SftTask,
    pub context: Context,
    pub target: SftTarget,
}

/// Score thresholds of the corpus-to-task selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Task-I targets need at least this score.
    pub task1: f64,
    /// Task-II positive targets need at least this score.
    pub task2_positive: f64,
    /// Task-III targets need at least this score.
    pub task3: f64,
    /// Negatives (Task-II negative targets, all context rounds) score strictly below this.
    pub negative: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { task1: 0.8, task2_positive: 0.7, task3: 0.8, negative: 0.5 }
    }
}

impl Thresholds {
    /// Every positive threshold lowered to `p`.
    pub fn uniform_positive(p: f64) -> Self {
        Self { task1: p, task2_positive: p, task3: p, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for p in [self.task1, self.task2_positive, self.task3] {
            if !(0.0..=1.0).contains(&p) || p < self.negative {
                return Err(Error::Config(format!("positive threshold {p} must lie in [negative, 1]")));
            }
        }
        Ok(())
    }
}

fn unique_indices(images: &[ScoredImage], keep: impl Fn(f64) -> bool) -> Vec<usize> {
    let mut seen: Vec<GridImage> = Vec::new();
    let mut out = Vec::new();
    for (i, s) in images.iter().enumerate() {
        if keep(s.score) && !seen.contains(&s.cells) {
            seen.push(s.cells);
            out.push(i);
        }
    }
    out
}

fn rejected_round(img: &ScoredImage) -> PriorRound {
    PriorRound { image: img.cells, reason: img.reason.codes() }
}

pub fn build_task1(corpus: &[CorpusEntry], th: &Thresholds) -> Result<Vec<SftExample>> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("empty corpus".into()));
    }
    let out: Vec<SftExample> = corpus
        .iter()
        .flat_map(|e| {
            e.images.iter().filter(|s| s.score >= th.task1).map(|s| SftExample {
                task: SftTask::I,
                context: Context::image(e.prompt.clone(), Vec::new()),
                target: SftTarget::Image(s.cells),
            })
        })
        .collect();
    if out.is_empty() {
        return Err(Error::EmptyStream("no corpus image reaches the Task-I threshold".into()));
    }
    Ok(out)
}

/// For each entry: `t - 1` distinct negatives as rejected context rounds, then
/// one positive target (`YES`) and one further negative target (`NO` + reasons).
pub fn build_task2(corpus: &[CorpusEntry], t: usize, th: &Thresholds, seed: u64) -> Result<Vec<SftExample>> {
    if !(1..=3).contains(&t) {
        return Err(Error::InvalidInput(format!("Task-II rounds must be in 1..=3, got {t}")));
    }
    let mut out = Vec::new();
    let mut skipped = 0;
    for (n, e) in corpus.iter().enumerate() {
        let mut r = rng::rng(rng::derive(seed, &[2, t as u64, n as u64]));
        let neg = unique_indices(&e.images, |s| s < th.negative);
        let pos = unique_indices(&e.images, |s| s >= th.task2_positive);
        if neg.len() < t || pos.is_empty() {
            skipped += 1;
            continue;
        }
        let picked: Vec<usize> = neg.choose_multiple(&mut r, t).copied().collect();
        let prior: Vec<PriorRound> = picked[..t - 1].iter().map(|&i| rejected_round(&e.images[i])).collect();
        let p = &e.images[*pos.choose(&mut r).unwrap()];
        let q = &e.images[picked[t - 1]];
        out.push(SftExample {
            task: SftTask::II,
            context: Context::text(e.prompt.clone(), prior.clone(), p.cells),
            target: SftTarget::Text { yes: true, reason: Vec::new() },
        });
        out.push(SftExample {
            task: SftTask::II,
            context: Context::text(e.prompt.clone(), prior, q.cells),
            target: SftTarget::Text { yes: false, reason: q.reason.codes() },
        });
    }
    if skipped > 0 {
        log::debug!("task II (t = {t}): skipped {skipped} entries without enough negatives or positives");
    }
    Ok(out)
}

/// For each entry: `t` distinct negatives as rejected rounds, then a regenerated target image.
pub fn build_task3(corpus: &[CorpusEntry], t: usize, th: &Thresholds, seed: u64) -> Result<Vec<SftExample>> {
    if !(1..=2).contains(&t) {
        return Err(Error::InvalidInput(format!("Task-III rounds must be in 1..=2, got {t}")));
    }
    let mut out = Vec::new();
    let mut skipped = 0;
    for (n, e) in corpus.iter().enumerate() {
        let mut r = rng::rng(rng::derive(seed, &[3, t as u64, n as u64]));
        let neg = unique_indices(&e.images, |s| s < th.negative);
        let pos = unique_indices(&e.images, |s| s >= th.task3);
        if neg.len() < t || pos.is_empty() {
            skipped += 1;
            continue;
        }
        let prior = neg.choose_multiple(&mut r, t).map(|&i| rejected_round(&e.images[i])).collect();
        let target = e.images[*pos.choose(&mut r).unwrap()].cells;
        out.push(SftExample {
            task: SftTask::III,
            context: Context::image(e.prompt.clone(), prior),
            target: SftTarget::Image(target),
        });
    }
    if skipped > 0 {
        log::debug!("task III (t = {t}): skipped {skipped} entries without enough negatives or positives");
    }
    Ok(out)
}

/// The three streams: Task-I, Task-II over `t = 1..=t2`, Task-III over `t = 1..=t3`.
pub fn build_tasks(
    corpus: &[CorpusEntry],
    th: &Thresholds,
    t2: usize,
    t3: usize,
    seed: u64,
) -> Result<[Vec<SftExample>; 3]> {
    th.validate()?;
    let task1 = build_task1(corpus, th)?;
    let mut task2 = Vec::new();
    for t in 1..=t2 {
        task2.extend(build_task2(corpus, t, th, seed)?);
    }
    let mut task3 = Vec::new();
    for t in 1..=t3 {
        task3.extend(build_task3(corpus, t, th, seed)?);
    }
    Ok([task1, task2, task3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sft::corpus::{build_corpus, GeneratorMix};
    use crate::world::qa_score;

    fn corpus() -> Vec<CorpusEntry> {
        build_corpus(&GeneratorMix::default(), 60, 8, 17).unwrap()
    }

    #[test]
    fn task1_targets_clear_the_threshold() {
        let c = corpus();
        let th = Thresholds::default();
        let t1 = build_task1(&c, &th).unwrap();
        let expected: usize = c.iter().map(|e| e.images.iter().filter(|s| s.score >= 0.8).count()).sum();
        assert_eq!(t1.len(), expected);
        for ex in &t1 {
            let SftTarget::Image(g) = ex.target else { panic!("image target") };
            assert!(qa_score(ex.context.prompt().unwrap(), &g) >= 0.8);
            assert!(ex.context.prior_rounds.is_empty());
        }
        assert!(build_task1(&[], &th).is_err());
        assert!(matches!(build_task1(&c, &Thresholds::uniform_positive(1.0 + 1e-9)), Err(Error::EmptyStream(_))));
    }

    #[test]
    fn task2_pairs_a_yes_with_a_reasoned_no() {
        let c = corpus();
        let th = Thresholds::default();
        for t in 1..=3 {
            let ex = build_task2(&c, t, &th, 4).unwrap();
            assert!(!ex.is_empty() && ex.len() % 2 == 0);
            for pair in ex.chunks(2) {
                let prompt = pair[0].context.prompt().unwrap();
                assert_eq!(pair[0].context.prior_rounds.len(), t - 1);
                assert_eq!(pair[0].context.prior_rounds, pair[1].context.prior_rounds);
                let pos = pair[0].context.subject.unwrap();
                let neg = pair[1].context.subject.unwrap();
                assert!(qa_score(prompt, &pos) >= 0.7);
                assert!(qa_score(prompt, &neg) < 0.5);
                assert_eq!(pair[0].target, SftTarget::Text { yes: true, reason: Vec::new() });
                let SftTarget::Text { yes: false, reason } = &pair[1].target else { panic!("NO target") };
                assert_eq!(*reason, crate::world::render_reason(prompt, &neg).codes());
                let mut seen: Vec<GridImage> = pair[0].context.prior_rounds.iter().map(|p| p.image).collect();
                seen.push(neg);
                let n = seen.len();
                seen.dedup();
                seen.sort_by_key(|g| g.ids().to_vec());
                seen.dedup();
                assert_eq!(seen.len(), n, "negatives are distinct");
                assert!(pair[0].context.prior_rounds.iter().all(|p| qa_score(prompt, &p.image) < 0.5));
            }
        }
        assert!(build_task2(&c, 0, &th, 4).is_err());
        assert!(build_task2(&c, 4, &th, 4).is_err());
    }

    #[test]
    fn task3_regenerates_after_rejections() {
        let c = corpus();
        let th = Thresholds::default();
        for t in 1..=2 {
            let ex = build_task3(&c, t, &th, 4).unwrap();
            assert!(!ex.is_empty());
            for e in &ex {
                let prompt = e.context.prompt().unwrap();
                assert_eq!(e.context.prior_rounds.len(), t);
                for p in &e.context.prior_rounds {
                    assert!(qa_score(prompt, &p.image) < 0.5);
                    assert_eq!(p.reason, crate::world::render_reason(prompt, &p.image).codes());
                }
                let SftTarget::Image(g) = e.target else { panic!("image target") };
                assert!(qa_score(prompt, &g) >= 0.8);
            }
        }
        assert!(build_task3(&c, 3, &th, 4).is_err());
    }

    #[test]
    fn text_targets_end_with_eos() {
        let t = SftTarget::Text { yes: false, reason: vec![ReasonCode::from_index(3).unwrap()] };
        assert_eq!(t.tokens(), vec![text_vocab::NO, text_vocab::FIRST_REASON + 3, text_vocab::EOS]);
    }

    #[test]
    fn thresholds_validate() {
        assert!(Thresholds::default().validate().is_ok());
        assert!(Thresholds::uniform_positive(0.4).validate().is_err());
        assert!(Thresholds::uniform_positive(1.2).validate().is_err());
    }
}
