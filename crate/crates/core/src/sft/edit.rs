use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tasks::{SftExample, SftTarget, SftTask};
use crate::error::{Error, Result};
use crate::policy::Context;
use crate::rng;
use crate::world::{edit_scores, CellToken, EditInstruction, EditTask, GridImage, GRID_CELLS, IMAGE_VOCAB};

/// A candidate edit output for a `(source, instruction)` pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditPair {
    pub source: GridImage,
    pub instr: EditInstruction,
    pub output: GridImage,
}

impl EditPair {
    pub fn scores(&self) -> Result<(f64, f64)> {
        edit_scores(&self.source, &self.instr, &self.output)
    }
}

/// Raw editing pairs: per task, the exact edit with probability 0.5, the
/// exact edit with one cell overwritten with probability 0.25, otherwise an
/// unedited copy of the source.
pub fn gen_edit_pairs(n: usize, seed: u64) -> Vec<EditPair> {
    (0..n as u64)
        .map(|i| {
            let task = EditTask::generate(rng::derive(seed, &[rng::stream::EDIT_TRAIN, i]));
            let mut r = rng::rng(rng::derive(seed, &[rng::stream::EDIT_TRAIN, i, 1]));
            let u: f64 = r.random();
            let output = if u < 0.5 {
                task.reference
            } else if u < 0.75 {
                let mut g = task.reference;
                let cell = r.random_range(0..GRID_CELLS);
                g.set(cell, CellToken::from_id(r.random_range(0..IMAGE_VOCAB as u8)).unwrap());
                g
            } else {
                task.source
            };
            EditPair { source: task.source, instr: task.instr, output }
        })
        .collect()
}

/// Keep pairs whose following and preserving scores both reach `thresh`.
pub fn filter_edit_pairs(raw: &[EditPair], thresh: f64) -> Result<Vec<EditPair>> {
    if !(thresh > 0.0 && thresh <= 1.0) {
        return Err(Error::InvalidInput(format!("edit filter threshold {thresh} outside (0, 1]")));
    }
    let mut out = Vec::new();
    for p in raw {
        let (flw, psv) = p.scores()?;
        if flw >= thresh && psv >= thresh {
            out.push(p.clone());
        }
    }
    Ok(out)
}

pub fn build_edit_examples(pairs: &[EditPair]) -> Vec<SftExample> {
    pairs
        .iter()
        .map(|p| SftExample {
            task: SftTask::Edit,
            context: Context::edit(p.source, p.instr.clone()),
            target: SftTarget::Image(p.output),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_keeps_exactly_the_pairs_above_threshold() {
        let raw = gen_edit_pairs(300, 2);
        let kept = filter_edit_pairs(&raw, 0.7).unwrap();
        let expected = raw
            .iter()
            .filter(|p| {
                let (f, s) = p.scores().unwrap();
                f >= 0.7 && s >= 0.7
            })
            .count();
        assert_eq!(kept.len(), expected);
        assert!(kept.len() >= 100 && kept.len() < raw.len());
        assert!(filter_edit_pairs(&raw, 0.0).is_err());
        assert!(filter_edit_pairs(&raw, 1.5).is_err());
        assert_eq!(build_edit_examples(&kept).len(), kept.len());
    }

    #[test]
    fn pairs_are_reproducible() {
        assert_eq!(gen_edit_pairs(20, 5), gen_edit_pairs(20, 5));
        assert_ne!(gen_edit_pairs(20, 5), gen_edit_pairs(20, 6));
    }
}
