//! Exact semantic oracle: tuple satisfaction, QA score and structured reasons.

use serde::{Deserialize, Serialize};

use super::prompt::{PromptSpec, SemanticTuple};
use super::tokens::GridImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureMode {
    Missing,
    WrongColor,
    WrongCount,
    WrongPosition,
}

/// A reason token: one per valid (tuple kind, failure mode) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReasonCode {
    ExistsMissing,
    ExistsWrongColor,
    CountMissing,
    CountWrongCount,
    BindingMissing,
    BindingWrongColor,
    RelationMissing,
    RelationWrongPosition,
}

impl ReasonCode {
    pub const COUNT: usize = 8;
    pub const ALL: [ReasonCode; Self::COUNT] = [
        ReasonCode::ExistsMissing,
        ReasonCode::ExistsWrongColor,
        ReasonCode::CountMissing,
        ReasonCode::CountWrongCount,
        ReasonCode::BindingMissing,
        ReasonCode::BindingWrongColor,
        ReasonCode::RelationMissing,
        ReasonCode::RelationWrongPosition,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// The code for a failing tuple, or `None` if the pair is not a valid combination.
    pub fn of(tuple: &SemanticTuple, mode: FailureMode) -> Option<Self> {
        use FailureMode as M;
        use SemanticTuple as T;
        Some(match (tuple, mode) {
            (T::Exists { .. }, M::Missing) => ReasonCode::ExistsMissing,
            (T::Exists { .. }, M::WrongColor) => ReasonCode::ExistsWrongColor,
            (T::Count { .. }, M::Missing) => ReasonCode::CountMissing,
            (T::Count { .. }, M::WrongCount) => ReasonCode::CountWrongCount,
            (T::ColorBinding { .. }, M::Missing) => ReasonCode::BindingMissing,
            (T::ColorBinding { .. }, M::WrongColor) => ReasonCode::BindingWrongColor,
            (T::Relation { .. }, M::Missing) => ReasonCode::RelationMissing,
            (T::Relation { .. }, M::WrongPosition) => ReasonCode::RelationWrongPosition,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasonItem {
    pub tuple: SemanticTuple,
    pub mode: FailureMode,
}

impl ReasonItem {
    pub fn code(&self) -> ReasonCode {
        ReasonCode::of(&self.tuple, self.mode).expect("oracle only emits valid pairs")
    }
}

/// Structured mismatch assertions, one per unsatisfied tuple, in prompt order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReasonText {
    pub items: Vec<ReasonItem>,
}

impl ReasonText {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn codes(&self) -> Vec<ReasonCode> {
        self.items.iter().map(ReasonItem::code).collect()
    }
}

/// `None` if the tuple is satisfied, otherwise why it fails.
pub fn check_tuple(tuple: &SemanticTuple, image: &GridImage) -> Option<FailureMode> {
    match *tuple {
        SemanticTuple::Exists { object } => {
            if image.contains(object) {
                None
            } else if image.count_shape(object.shape) > 0 {
                Some(FailureMode::WrongColor)
            } else {
                Some(FailureMode::Missing)
            }
        }
        SemanticTuple::Count { shape, n } => {
            let have = image.count_shape(shape);
            if have == n as usize {
                None
            } else if have == 0 {
                Some(FailureMode::Missing)
            } else {
                Some(FailureMode::WrongCount)
            }
        }
        SemanticTuple::ColorBinding { shape, color } => {
            let have = image.count_shape(shape);
            if have == 0 {
                Some(FailureMode::Missing)
            } else if image.cells().iter().any(|c| c.shape() == Some(shape) && c.object().unwrap().color != color) {
                Some(FailureMode::WrongColor)
            } else {
                None
            }
        }
        SemanticTuple::Relation { a, b, rel } => match (image.centroid(a), image.centroid(b)) {
            (Some(ca), Some(cb)) => (!rel.holds(ca, cb)).then_some(FailureMode::WrongPosition),
            _ => Some(FailureMode::Missing),
        },
    }
}

/// Number of satisfied tuples.
pub fn satisfied_count(prompt: &PromptSpec, image: &GridImage) -> usize {
    prompt.tuples.iter().filter(|t| check_tuple(t, image).is_none()).count()
}

/// Fraction of the prompt's tuples that the image satisfies.
pub fn qa_score(prompt: &PromptSpec, image: &GridImage) -> f64 {
    satisfied_count(prompt, image) as f64 / prompt.tuples.len() as f64
}

pub fn render_reason(prompt: &PromptSpec, image: &GridImage) -> ReasonText {
    ReasonText {
        items: prompt
            .tuples
            .iter()
            .filter_map(|t| check_tuple(t, image).map(|mode| ReasonItem { tuple: *t, mode }))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Category, Color, Object, Shape};

    fn obj(s: Shape, c: Color) -> Object {
        Object::new(s, c)
    }

    fn grid(cells: &[(usize, Object)]) -> GridImage {
        let mut g = GridImage::empty();
        for &(i, o) in cells {
            g.set(i, o.token());
        }
        g
    }

    #[test]
    fn half_satisfied_two_object_prompt() {
        let p = PromptSpec::from_surface(0, Category::TwoObj, "exists red square; exists blue circle").unwrap();
        let g = grid(&[(5, obj(Shape::Square, Color::Red))]);
        assert_eq!(qa_score(&p, &g), 0.5);
        assert_eq!(render_reason(&p, &g).codes(), vec![ReasonCode::ExistsMissing]);
    }

    #[test]
    fn empty_grid_scores_zero() {
        let p = PromptSpec::from_surface(0, Category::SingObj, "exists green triangle").unwrap();
        assert_eq!(qa_score(&p, &GridImage::empty()), 0.0);
    }

    #[test]
    fn wrong_color_and_wrong_count() {
        let p = PromptSpec::from_surface(0, Category::SingObj, "exists blue circle").unwrap();
        let g = grid(&[(0, obj(Shape::Circle, Color::Red))]);
        let r = render_reason(&p, &g);
        assert_eq!(r.items.len(), 1);
        assert_eq!(r.items[0].mode, FailureMode::WrongColor);

        let p = PromptSpec::from_surface(0, Category::Counting, "count square 2").unwrap();
        let sq = obj(Shape::Square, Color::Yellow);
        let g = grid(&[(0, sq), (3, sq), (9, sq)]);
        assert_eq!(render_reason(&p, &g).items[0].mode, FailureMode::WrongCount);
    }

    #[test]
    fn binding_needs_every_instance_in_color() {
        let p = PromptSpec::from_surface(0, Category::Color, "bind triangle green").unwrap();
        let good = grid(&[(1, obj(Shape::Triangle, Color::Green)), (2, obj(Shape::Triangle, Color::Green))]);
        assert_eq!(qa_score(&p, &good), 1.0);
        let mixed = grid(&[(1, obj(Shape::Triangle, Color::Green)), (2, obj(Shape::Triangle, Color::Blue))]);
        assert_eq!(render_reason(&p, &mixed).codes(), vec![ReasonCode::BindingWrongColor]);
    }

    #[test]
    fn relation_compares_centroids() {
        let a = obj(Shape::Square, Color::Red);
        let b = obj(Shape::Circle, Color::Blue);
        let p = PromptSpec::from_surface(0, Category::Position, "exists red square; exists blue circle; rel red square left-of blue circle")
            .unwrap();
        assert_eq!(qa_score(&p, &grid(&[(4, a), (7, b)])), 1.0);
        let g = grid(&[(7, a), (4, b)]);
        assert!((qa_score(&p, &g) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(render_reason(&p, &g).codes(), vec![ReasonCode::RelationWrongPosition]);
        // Same column: not strictly left.
        assert_eq!(render_reason(&p, &grid(&[(1, a), (13, b)])).codes(), vec![ReasonCode::RelationWrongPosition]);
    }

    #[test]
    fn reason_empty_iff_perfect() {
        for seed in 0..300u64 {
            let c = Category::ALL[(seed % 6) as usize];
            let p = crate::world::gen_prompt(c, seed);
            let mut r = crate::rng::rng(seed);
            let g = crate::world::random_source(&mut r);
            assert_eq!(qa_score(&p, &g) == 1.0, render_reason(&p, &g).is_empty());
        }
    }
}
