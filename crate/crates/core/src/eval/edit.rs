use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::suite::EvalSuite;
use crate::error::Result;
use crate::policy::{decode_greedy, Context, Policy};
use crate::world::{edit_scores, EditKind, GridImage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditResult {
    pub task: usize,
    pub kind: EditKind,
    pub flw: f64,
    pub psv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditScores {
    pub mean_flw: f64,
    pub mean_psv: f64,
    pub tasks: usize,
    #[serde(skip)]
    pub results: Vec<EditResult>,
}

/// Greedy single-round edit of every suite task under guidance `cfg_scale`.
pub fn eval_edit<P: Policy + ?Sized>(policy: &P, suite: &EvalSuite, cfg_scale: f64) -> Result<EditScores> {
    let results = suite
        .edit_tasks
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let ctx = Context::edit(t.source, t.instr.clone());
            let seg = decode_greedy(policy, &ctx, cfg_scale);
            let out = GridImage::from_ids(&seg.tokens)?;
            let (flw, psv) = edit_scores(&t.source, &t.instr, &out)?;
            Ok(EditResult { task: i, kind: t.instr.op.kind(), flw, psv })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = results.len().max(1) as f64;
    Ok(EditScores {
        mean_flw: results.iter().map(|r| r.flw).sum::<f64>() / n,
        mean_psv: results.iter().map(|r| r.psv).sum::<f64>() / n,
        tasks: results.len(),
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::scripted::{ImageScript, JudgeScript, ScriptedPolicy};

    #[test]
    fn reference_editors_bracket_the_scores() {
        let suite = EvalSuite::generate(1, 60, 3);
        let copy = ScriptedPolicy::new(ImageScript::CopySource, JudgeScript::AlwaysYes);
        let s = eval_edit(&copy, &suite, 4.0).unwrap();
        assert_eq!(s.tasks, 60);
        assert_eq!(s.mean_psv, 1.0);
        assert!(s.mean_flw < 0.35, "copying follows little of the instruction: {}", s.mean_flw);

        let exact = ScriptedPolicy::new(ImageScript::ExactEdit, JudgeScript::AlwaysYes);
        let s = eval_edit(&exact, &suite, 4.0).unwrap();
        assert_eq!((s.mean_flw, s.mean_psv), (1.0, 1.0));
        assert!(s.results.iter().all(|r| r.kind == suite.edit_tasks[r.task].instr.op.kind()));
    }

    #[test]
    fn empty_suite_scores_zero() {
        let suite = EvalSuite { prompts: Vec::new(), edit_tasks: Vec::new() };
        let copy = ScriptedPolicy::new(ImageScript::CopySource, JudgeScript::AlwaysYes);
        let s = eval_edit(&copy, &suite, 4.0).unwrap();
        assert_eq!((s.tasks, s.mean_flw, s.mean_psv), (0, 0.0, 0.0));
    }
}
