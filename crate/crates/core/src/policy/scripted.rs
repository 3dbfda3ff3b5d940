//! Deterministic reference policies: fixed judges and fixed image writers.
//! Useful as baselines and for checking evaluation plumbing.

use super::context::{text_vocab, Condition, Context, Head};
use super::{Policy, PolicyParams};
use crate::world::{apply_edit, qa_score, render_reason, GridImage, IMAGE_VOCAB};

const OFF: f64 = -1e6;

fn one_hot(n: usize, at: usize) -> Vec<f64> {
    let mut v = vec![OFF; n];
    v[at] = 0.0;
    v
}

/// How a scripted policy writes images.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageScript {
    /// Always the same grid.
    Fixed(GridImage),
    /// The edit source unchanged (prompt contexts fall back to empty cells).
    CopySource,
    /// The exact edit (prompt contexts fall back to empty cells).
    ExactEdit,
    /// The image head of a parameterized policy.
    Learned(PolicyParams),
}

/// How a scripted policy judges images.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JudgeScript {
    AlwaysYes,
    AlwaysNo,
    /// `YES` iff the oracle score is above 0.5, followed by the oracle's reason tokens.
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedPolicy {
    pub image: ImageScript,
    pub judge: JudgeScript,
}

impl ScriptedPolicy {
    pub fn new(image: ImageScript, judge: JudgeScript) -> Self {
        Self { image, judge }
    }

    fn image_token(&self, ctx: &Context, p: usize) -> u8 {
        let p = p.min(crate::world::GRID_CELLS - 1);
        match (&self.image, &ctx.condition) {
            (ImageScript::Fixed(g), _) => g.get(p).id(),
            (ImageScript::CopySource, Condition::Edit { source, .. }) => source.get(p).id(),
            (ImageScript::ExactEdit, Condition::Edit { source, instr }) => {
                apply_edit(source, instr).map(|g| g.get(p).id()).unwrap_or(0)
            }
            _ => 0,
        }
    }

    fn text_token(&self, ctx: &Context, prefix: &[u8]) -> u8 {
        let subject = ctx.subject.unwrap_or_else(GridImage::empty);
        let prompt = ctx.prompt();
        match (self.judge, prefix.is_empty()) {
            (JudgeScript::AlwaysYes, true) => text_vocab::YES,
            (JudgeScript::AlwaysNo, true) => text_vocab::NO,
            (JudgeScript::Oracle, true) => match prompt {
                Some(p) if qa_score(p, &subject) > 0.5 => text_vocab::YES,
                _ => text_vocab::NO,
            },
            (JudgeScript::Oracle, false) => {
                let codes = prompt.map(|p| render_reason(p, &subject).codes()).unwrap_or_default();
                codes.get(prefix.len() - 1).map_or(text_vocab::EOS, |&c| text_vocab::reason(c))
            }
            (_, false) => text_vocab::EOS,
        }
    }
}

impl Policy for ScriptedPolicy {
    fn branch_logits(&self, ctx: &Context, prefix: &[u8], pad: bool) -> Vec<f64> {
        if let (Head::Image, ImageScript::Learned(p)) = (ctx.head, &self.image) {
            return p.branch_logits(ctx, prefix, pad);
        }
        match ctx.head {
            Head::Image => one_hot(IMAGE_VOCAB, self.image_token(ctx, prefix.len()) as usize),
            Head::Text => one_hot(text_vocab::SIZE, self.text_token(ctx, prefix) as usize),
        }
    }
}
