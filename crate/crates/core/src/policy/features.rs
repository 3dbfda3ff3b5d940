//! Hand-built featurizers for the two heads.
//!
//! Image head: bias, position, segment progress, a raw-token summary of the
//! previous round, prompt-derived planning features, and edit features.
//! Text head: a verdict block and a reason block; the image under evaluation
//! is summarized semantically (per-object counts, quadrant occupancy,
//! coarse tuple evidence).
//!
//! Prompt-derived features are zero when the context is padded, which is
//! what the unconditional branch of classifier-free guidance sees.

use std::ops::Range;

use super::context::{text_vocab, Condition, Context, Head};
use crate::world::{
    col_of, row_of, EditOp, GridImage, Object, PromptSpec, ReasonCode,
    SemanticTuple, SpatialRelation, GRID_CELLS, IMAGE_VOCAB, NUM_COLORS, NUM_OBJECTS, NUM_SHAPES,
};

pub const FEATURE_VERSION: u32 = 2;

/// Image-head feature offsets.
pub mod img {
    use super::*;

    pub const BIAS: usize = 0;
    pub const POSITION: usize = 1;
    pub const PLACED: usize = POSITION + GRID_CELLS;
    pub const PREFIX_OBJECT: usize = PLACED + 5;
    pub const PREFIX_SHAPE: usize = PREFIX_OBJECT + NUM_OBJECTS;
    pub const PRIOR_FLAG: usize = PREFIX_SHAPE + NUM_SHAPES * 5;
    pub const PRIOR_TOKEN: usize = PRIOR_FLAG + 1;
    pub const PRIOR_REASON: usize = PRIOR_TOKEN + IMAGE_VOCAB;
    pub const PROMPT: usize = PRIOR_REASON + ReasonCode::COUNT;
    pub const MENTION: usize = PROMPT;
    pub const BIND: usize = MENTION + NUM_OBJECTS;
    pub const COUNT_N: usize = BIND + NUM_OBJECTS;
    pub const COUNT_DEFICIT: usize = COUNT_N + NUM_SHAPES * 3;
    pub const REL_A: usize = COUNT_DEFICIT + NUM_SHAPES;
    pub const REL_B: usize = REL_A + NUM_OBJECTS;
    pub const EDIT_SOURCE: usize = REL_B + NUM_OBJECTS;
    pub const EDIT_OP: usize = EDIT_SOURCE + IMAGE_VOCAB;
    /// The cell's shape, then its color, equals the instruction target's;
    /// one pair of slots per recolor, remove, move.
    pub const EDIT_MATCH: usize = EDIT_OP + 4;
    /// The cell is the instruction's destination; one slot per add, move.
    pub const EDIT_DEST: usize = EDIT_MATCH + 6;
    pub const EDIT_SHAPE: usize = EDIT_DEST + 2;
    pub const EDIT_COLOR: usize = EDIT_SHAPE + NUM_SHAPES;
    /// `EDIT_SHAPE` and `EDIT_COLOR` again, only on cells that share the
    /// target's shape or color, or are the destination.
    pub const EDIT_AT_SHAPE: usize = EDIT_COLOR + NUM_COLORS;
    pub const EDIT_AT_COLOR: usize = EDIT_AT_SHAPE + NUM_SHAPES;
    pub const DIM: usize = EDIT_AT_COLOR + NUM_COLORS;

    pub const PRIOR_BLOCK: Range<usize> = PRIOR_FLAG..PROMPT;
    pub const PROMPT_BLOCK: Range<usize> = PROMPT..EDIT_SOURCE;
    pub const EDIT_INSTR_BLOCK: Range<usize> = EDIT_OP..DIM;
}

/// Text-head feature offsets.
pub mod txt {
    use super::*;

    pub const V_BIAS: usize = 0;
    pub const N_TUPLES: usize = 1;
    pub const ROUND: usize = N_TUPLES + 3;
    pub const EVIDENCE: usize = ROUND + 3;
    pub const EV_EXISTS: usize = EVIDENCE;
    pub const EV_COUNT: usize = EV_EXISTS + 3;
    pub const EV_BIND: usize = EV_COUNT + 4;
    pub const EV_REL: usize = EV_BIND + 3;
    pub const SUMMARY: usize = EV_REL + 4;
    pub const QUADRANTS: usize = SUMMARY + NUM_OBJECTS;
    pub const R_BIAS: usize = QUADRANTS + 4;
    pub const R_SAID_YES: usize = R_BIAS + 1;
    pub const R_EVIDENCE: usize = R_SAID_YES + 1;
    pub const R_AMBIGUOUS: usize = R_EVIDENCE + ReasonCode::COUNT;
    pub const R_EMITTED: usize = R_AMBIGUOUS + 1;
    pub const R_LEN: usize = R_EMITTED + ReasonCode::COUNT;
    pub const DIM: usize = R_LEN + 1;

    pub const VERDICT_BLOCK: Range<usize> = V_BIAS..R_BIAS;
    pub const REASON_BLOCK: Range<usize> = R_BIAS..DIM;
    pub const PRIOR_BLOCK: Range<usize> = ROUND..EVIDENCE;
}

pub fn dim(head: Head) -> usize {
    match head {
        Head::Image => img::DIM,
        Head::Text => txt::DIM,
    }
}

/// Feature vector of `ctx` after `prefix` has been emitted in the current segment.
pub fn featurize(ctx: &Context, prefix: &[u8]) -> Vec<f64> {
    let mut out = vec![0.0; dim(ctx.head)];
    featurize_into(ctx, prefix, ctx.pad, &mut out);
    out
}

/// Like [`featurize`] but writes into `out` and lets the caller force padding.
pub fn featurize_into(ctx: &Context, prefix: &[u8], pad: bool, out: &mut [f64]) {
    out.fill(0.0);
    match ctx.head {
        Head::Image => image_features(ctx, prefix, pad, out),
        Head::Text => text_features(ctx, prefix, pad, out),
    }
}

fn image_features(ctx: &Context, prefix: &[u8], pad: bool, out: &mut [f64]) {
    let p = prefix.len().min(GRID_CELLS - 1);
    out[img::BIAS] = 1.0;
    out[img::POSITION + p] = 1.0;
    let placed = prefix.iter().filter(|&&t| t != 0).count();
    out[img::PLACED + placed.min(4)] = 1.0;
    let mut shapes = [0usize; NUM_SHAPES];
    for &t in prefix.iter().filter(|&&t| t != 0) {
        let o = Object::from_index(t as usize - 1);
        out[img::PREFIX_OBJECT + o.index()] = 1.0;
        shapes[o.shape.index()] += 1;
    }
    for (s, &n) in shapes.iter().enumerate() {
        out[img::PREFIX_SHAPE + s * 5 + n.min(4)] = 1.0;
    }

    if let Some(last) = ctx.prior_rounds.last() {
        out[img::PRIOR_FLAG] = 1.0;
        out[img::PRIOR_TOKEN + last.image.get(p).id() as usize] = 1.0;
        for code in &last.reason {
            out[img::PRIOR_REASON + code.index()] += 1.0;
        }
    }

    match &ctx.condition {
        Condition::Prompt(prompt) => {
            if !pad {
                prompt_plan_features(prompt, prefix, p, out);
            }
        }
        Condition::Edit { source, instr } => {
            out[img::EDIT_SOURCE + source.get(p).id() as usize] = 1.0;
            if !pad {
                edit_instr_features(source, &instr.op, p, out);
            }
        }
    }
}

fn placed_in(prefix: &[u8], o: Object) -> bool {
    prefix.contains(&o.token().id())
}

fn prompt_plan_features(prompt: &PromptSpec, prefix: &[u8], p: usize, out: &mut [f64]) {
    for t in &prompt.tuples {
        match *t {
            SemanticTuple::Exists { object } => {
                if !placed_in(prefix, object) {
                    out[img::MENTION + object.index()] += 1.0;
                }
            }
            SemanticTuple::ColorBinding { shape, color } => {
                let o = Object::new(shape, color);
                if !placed_in(prefix, o) {
                    out[img::BIND + o.index()] += 1.0;
                }
            }
            SemanticTuple::Count { shape, n } => {
                out[img::COUNT_N + shape.index() * 3 + (n as usize).clamp(2, 4) - 2] += 1.0;
                let have = prefix
                    .iter()
                    .filter(|&&t| t != 0 && Object::from_index(t as usize - 1).shape == shape)
                    .count();
                out[img::COUNT_DEFICIT + shape.index()] += (n as usize).saturating_sub(have) as f64;
            }
            SemanticTuple::Relation { a, b, rel } => {
                let (fa, fb) = favorability(rel, p);
                out[img::REL_A + a.index()] += fa;
                out[img::REL_B + b.index()] += fb;
            }
        }
    }
}

/// How well cell `p` suits the first and second object of a relation, in `[0, 1]`.
fn favorability(rel: SpatialRelation, p: usize) -> (f64, f64) {
    let (r, c) = (row_of(p) as f64 / 3.0, col_of(p) as f64 / 3.0);
    match rel {
        SpatialRelation::LeftOf => (1.0 - c, c),
        SpatialRelation::RightOf => (c, 1.0 - c),
        SpatialRelation::Above => (1.0 - r, r),
        SpatialRelation::Below => (r, 1.0 - r),
    }
}

/// What the instruction names, plus whether cell `p` is its target or
/// destination. Which of several target cells actually changes is left to
/// the weights.
fn edit_instr_features(source: &GridImage, op: &EditOp, p: usize, out: &mut [f64]) {
    let here = source.get(p).object();
    let mut matches = |slot: usize, target: Object| {
        if let Some(h) = here {
            out[img::EDIT_MATCH + 2 * slot] = (h.shape == target.shape) as u8 as f64;
            out[img::EDIT_MATCH + 2 * slot + 1] = (h.color == target.color) as u8 as f64;
        }
    };
    let (kind, named) = match *op {
        EditOp::Recolor { target, color } => {
            matches(0, target);
            (0, Some(Object::new(target.shape, color)))
        }
        EditOp::Add { object, cell } => {
            if cell == p {
                out[img::EDIT_DEST] = 1.0;
            }
            (1, Some(object))
        }
        EditOp::Remove { target } => {
            matches(1, target);
            (2, None)
        }
        EditOp::Move { target, to } => {
            matches(2, target);
            if to == p {
                out[img::EDIT_DEST + 1] = 1.0;
            }
            (3, Some(target))
        }
    };
    out[img::EDIT_OP + kind] = 1.0;
    if let Some(o) = named {
        out[img::EDIT_SHAPE + o.shape.index()] = 1.0;
        out[img::EDIT_COLOR + o.color.index()] = 1.0;
        let touched = out[img::EDIT_MATCH..img::EDIT_SHAPE].iter().any(|&x| x != 0.0);
        if touched {
            out[img::EDIT_AT_SHAPE + o.shape.index()] = 1.0;
            out[img::EDIT_AT_COLOR + o.color.index()] = 1.0;
        }
    }
}

/// Coarse per-tuple evidence about `image`, summed over the prompt's tuples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Evidence {
    pub exists: [f64; 3],
    pub count: [f64; 4],
    pub bind: [f64; 3],
    /// missing, holds, tied, reversed
    pub rel: [f64; 4],
}

impl Evidence {
    pub fn of(prompt: &PromptSpec, image: &GridImage) -> Self {
        let mut e = Evidence::default();
        for t in &prompt.tuples {
            match *t {
                SemanticTuple::Exists { object } => {
                    let i = if image.contains(object) {
                        0
                    } else if image.count_shape(object.shape) > 0 {
                        1
                    } else {
                        2
                    };
                    e.exists[i] += 1.0;
                }
                SemanticTuple::Count { shape, n } => {
                    let have = image.count_shape(shape) as i64;
                    let i = match (have, (have - n as i64).abs()) {
                        (_, 0) => 0,
                        (0, _) => 1,
                        (_, 1) => 2,
                        _ => 3,
                    };
                    e.count[i] += 1.0;
                }
                SemanticTuple::ColorBinding { shape, color } => {
                    let have = image.count_shape(shape);
                    let matching = image.count_object(Object::new(shape, color));
                    let i = if have == 0 {
                        2
                    } else if matching < have {
                        1
                    } else {
                        0
                    };
                    e.bind[i] += 1.0;
                }
                SemanticTuple::Relation { a, b, rel } => {
                    let i = match (image.centroid(a), image.centroid(b)) {
                        (Some(ca), Some(cb)) => {
                            if rel.holds(ca, cb) {
                                1
                            } else if rel.holds(cb, ca) {
                                3
                            } else {
                                2
                            }
                        }
                        _ => 0,
                    };
                    e.rel[i] += 1.0;
                }
            }
        }
        e
    }

    /// Evidence mapped onto reason codes, plus the ambiguous-relation count.
    pub fn reason_counts(&self) -> ([f64; ReasonCode::COUNT], f64) {
        let mut c = [0.0; ReasonCode::COUNT];
        c[ReasonCode::ExistsMissing.index()] = self.exists[2];
        c[ReasonCode::ExistsWrongColor.index()] = self.exists[1];
        c[ReasonCode::CountMissing.index()] = self.count[1];
        c[ReasonCode::CountWrongCount.index()] = self.count[2] + self.count[3];
        c[ReasonCode::BindingMissing.index()] = self.bind[2];
        c[ReasonCode::BindingWrongColor.index()] = self.bind[1];
        c[ReasonCode::RelationMissing.index()] = self.rel[0];
        c[ReasonCode::RelationWrongPosition.index()] = self.rel[3];
        (c, self.rel[2])
    }
}

fn text_features(ctx: &Context, prefix: &[u8], pad: bool, out: &mut [f64]) {
    let subject = ctx.subject.as_ref().expect("text head needs an image under evaluation");
    let prompt = if pad { None } else { ctx.prompt() };
    let evidence = prompt.map(|p| Evidence::of(p, subject));

    if prefix.is_empty() {
        out[txt::V_BIAS] = 1.0;
        out[txt::ROUND + ctx.prior_rounds.len().min(2)] = 1.0;
        if let (Some(p), Some(e)) = (prompt, &evidence) {
            out[txt::N_TUPLES + (p.tuples.len() - 1).min(2)] = 1.0;
            out[txt::EV_EXISTS..txt::EV_EXISTS + 3].copy_from_slice(&e.exists);
            out[txt::EV_COUNT..txt::EV_COUNT + 4].copy_from_slice(&e.count);
            out[txt::EV_BIND..txt::EV_BIND + 3].copy_from_slice(&e.bind);
            out[txt::EV_REL..txt::EV_REL + 4].copy_from_slice(&e.rel);
        }
        for (i, c) in subject.cells().iter().enumerate() {
            if let Some(o) = c.object() {
                out[txt::SUMMARY + o.index()] += 0.25;
                let q = (row_of(i) / 2) * 2 + col_of(i) / 2;
                out[txt::QUADRANTS + q] += 0.25;
            }
        }
    } else {
        out[txt::R_BIAS] = 1.0;
        out[txt::R_SAID_YES] = (prefix[0] == text_vocab::YES) as u8 as f64;
        if let Some(e) = &evidence {
            let (codes, ambiguous) = e.reason_counts();
            out[txt::R_EVIDENCE..txt::R_EVIDENCE + ReasonCode::COUNT].copy_from_slice(&codes);
            out[txt::R_AMBIGUOUS] = ambiguous;
        }
        let mut emitted = 0usize;
        for code in prefix[1..].iter().filter_map(|&t| text_vocab::as_reason(t)) {
            out[txt::R_EMITTED + code.index()] += 1.0;
            emitted += 1;
        }
        out[txt::R_LEN] = emitted as f64 / 8.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PriorRound;
    use crate::world::{gen_prompt, render_reason, Category};

    fn some_image(seed: u64) -> GridImage {
        crate::world::random_source(&mut crate::rng::rng(seed))
    }

    #[test]
    fn padding_zeroes_the_prompt_block() {
        let prompt = gen_prompt(Category::Position, 11);
        let ctx = Context::image(prompt, Vec::new()).padded();
        for p in 0..GRID_CELLS {
            let prefix: Vec<u8> = some_image(p as u64).ids()[..p].to_vec();
            let phi = featurize(&ctx, &prefix);
            assert!(phi[img::PROMPT_BLOCK].iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn prior_round_only_touches_the_prior_block() {
        let prompt = gen_prompt(Category::TwoObj, 5);
        let img = some_image(3);
        let prior = vec![PriorRound { image: img, reason: render_reason(&prompt, &img).codes() }];
        let a = featurize(&Context::image(prompt.clone(), Vec::new()), &[0, 3]);
        let b = featurize(&Context::image(prompt.clone(), prior.clone()), &[0, 3]);
        for i in 0..img::DIM {
            if !img::PRIOR_BLOCK.contains(&i) {
                assert_eq!(a[i], b[i], "image feature {i}");
            }
        }
        assert_ne!(a, b);
        let subject = some_image(9);
        let a = featurize(&Context::text(prompt.clone(), Vec::new(), subject), &[]);
        let b = featurize(&Context::text(prompt, prior, subject), &[]);
        for i in 0..txt::DIM {
            if !txt::PRIOR_BLOCK.contains(&i) {
                assert_eq!(a[i], b[i], "text feature {i}");
            }
        }
        assert_ne!(a, b);
    }

    #[test]
    fn deterministic() {
        let ctx = Context::text(gen_prompt(Category::Color, 1), Vec::new(), some_image(2));
        assert_eq!(featurize(&ctx, &[1, 3]), featurize(&ctx, &[1, 3]));
    }
}
