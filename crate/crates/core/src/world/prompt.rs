use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tokens::{Color, Object, Shape, GRID_CELLS};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpatialRelation {
    LeftOf,
    RightOf,
    Above,
    Below,
}

impl SpatialRelation {
    pub const ALL: [SpatialRelation; 4] = [
        SpatialRelation::LeftOf,
        SpatialRelation::RightOf,
        SpatialRelation::Above,
        SpatialRelation::Below,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpatialRelation::LeftOf => "left-of",
            SpatialRelation::RightOf => "right-of",
            SpatialRelation::Above => "above",
            SpatialRelation::Below => "below",
        }
    }

    /// Whether a point at `(row_a, col_a)` stands in this relation to `(row_b, col_b)`.
    pub fn holds(self, a: (f64, f64), b: (f64, f64)) -> bool {
        match self {
            SpatialRelation::LeftOf => a.1 < b.1,
            SpatialRelation::RightOf => a.1 > b.1,
            SpatialRelation::Above => a.0 < b.0,
            SpatialRelation::Below => a.0 > b.0,
        }
    }
}

impl FromStr for SpatialRelation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SpatialRelation::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown relation `{s}`")))
    }
}

/// An atomic, checkable assertion about a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SemanticTuple {
    /// At least one cell holds this object.
    Exists { object: Object },
    /// Exactly `n` cells hold this shape, any color.
    Count { shape: Shape, n: u8 },
    /// Both objects are present and their centroids stand in `rel`.
    Relation { a: Object, b: Object, rel: SpatialRelation },
    /// The shape is present and every instance of it has this color.
    ColorBinding { shape: Shape, color: Color },
}

impl SemanticTuple {
    pub fn is_well_formed(&self) -> bool {
        match *self {
            SemanticTuple::Count { n, .. } => (n as usize) <= GRID_CELLS.min(4),
            SemanticTuple::Relation { a, b, .. } => a != b,
            _ => true,
        }
    }
}

impl fmt::Display for SemanticTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemanticTuple::Exists { object } => write!(f, "exists {object}"),
            SemanticTuple::Count { shape, n } => write!(f, "count {} {n}", shape.name()),
            SemanticTuple::Relation { a, b, rel } => write!(f, "rel {a} {} {b}", rel.name()),
            SemanticTuple::ColorBinding { shape, color } => {
                write!(f, "bind {} {}", shape.name(), color.name())
            }
        }
    }
}

impl FromStr for SemanticTuple {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let w: Vec<&str> = s.split_whitespace().collect();
        let obj = |c: &str, sh: &str| -> Result<Object> { Ok(Object::new(sh.parse()?, c.parse()?)) };
        let t = match w.as_slice() {
            ["exists", c, sh] => SemanticTuple::Exists { object: obj(c, sh)? },
            ["count", sh, n] => SemanticTuple::Count {
                shape: sh.parse()?,
                n: n.parse().map_err(|_| Error::InvalidInput(format!("bad count `{n}`")))?,
            },
            ["rel", ca, sa, rel, cb, sb] => SemanticTuple::Relation {
                a: obj(ca, sa)?,
                b: obj(cb, sb)?,
                rel: rel.parse()?,
            },
            ["bind", sh, c] => SemanticTuple::ColorBinding { shape: sh.parse()?, color: c.parse()? },
            _ => return Err(Error::InvalidInput(format!("unparseable tuple `{s}`"))),
        };
        if !t.is_well_formed() {
            return Err(Error::InvalidInput(format!("ill-formed tuple `{s}`")));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    SingObj,
    TwoObj,
    Counting,
    Color,
    Position,
    ColorAttr,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::SingObj,
        Category::TwoObj,
        Category::Counting,
        Category::Color,
        Category::Position,
        Category::ColorAttr,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::SingObj => "SingObj",
            Category::TwoObj => "TwoObj",
            Category::Counting => "Counting",
            Category::Color => "Color",
            Category::Position => "Position",
            Category::ColorAttr => "ColorAttr",
        }
    }

    /// Whether `tuples` follows this category's pattern.
    pub fn admits(self, tuples: &[SemanticTuple]) -> bool {
        use SemanticTuple as T;
        if !tuples.iter().all(SemanticTuple::is_well_formed) {
            return false;
        }
        match (self, tuples) {
            (Category::SingObj, [T::Exists { .. }]) => true,
            (Category::TwoObj, [T::Exists { object: a }, T::Exists { object: b }]) => {
                a.shape != b.shape
            }
            (Category::Counting, [T::Count { n, .. }]) => *n >= 1,
            (Category::Color, [T::ColorBinding { .. }]) => true,
            (
                Category::Position,
                [T::Exists { object: a }, T::Exists { object: b }, T::Relation { a: ra, b: rb, .. }],
            ) => a == ra && b == rb && a.shape != b.shape,
            (
                Category::ColorAttr,
                [T::ColorBinding { shape: s1, color: c1 }, T::ColorBinding { shape: s2, color: c2 }],
            ) => s1 != s2 && c1 != c2,
            _ => false,
        }
    }
}

impl FromStr for Category {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown category `{s}`")))
    }
}

/// A synthetic text-to-image request.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptSpec {
    pub id: u64,
    pub category: Category,
    pub tuples: Vec<SemanticTuple>,
    pub surface: String,
}

impl PromptSpec {
    pub fn new(id: u64, category: Category, tuples: Vec<SemanticTuple>) -> Result<Self> {
        if tuples.is_empty() || !category.admits(&tuples) {
            return Err(Error::InvalidInput(format!(
                "tuples do not follow the {} pattern",
                category.name()
            )));
        }
        let surface = surface_of(&tuples);
        Ok(Self { id, category, tuples, surface })
    }

    /// Rebuild a prompt from its canonical surface string.
    pub fn from_surface(id: u64, category: Category, surface: &str) -> Result<Self> {
        let tuples = parse_surface(surface)?;
        Self::new(id, category, tuples)
    }

    pub fn with_id(mut self, id: u64) -> Self {
        self.id = id;
        self
    }
}

pub fn surface_of(tuples: &[SemanticTuple]) -> String {
    tuples.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub fn parse_surface(surface: &str) -> Result<Vec<SemanticTuple>> {
    surface.split(';').map(|s| s.trim().parse()).collect()
}

fn random_object(r: &mut rng::Rng) -> Object {
    Object::new(*Shape::ALL.choose(r).unwrap(), *Color::ALL.choose(r).unwrap())
}

fn two_shapes(r: &mut rng::Rng) -> (Shape, Shape) {
    let picked: Vec<Shape> = Shape::ALL.choose_multiple(r, 2).copied().collect();
    (picked[0], picked[1])
}

/// Draw a prompt of `category`. The prompt id is the seed.
pub fn gen_prompt(category: Category, seed: u64) -> PromptSpec {
    let mut r = rng::rng(seed);
    let tuples = match category {
        Category::SingObj => vec![SemanticTuple::Exists { object: random_object(&mut r) }],
        Category::TwoObj => {
            let (s1, s2) = two_shapes(&mut r);
            vec![
                SemanticTuple::Exists { object: Object::new(s1, *Color::ALL.choose(&mut r).unwrap()) },
                SemanticTuple::Exists { object: Object::new(s2, *Color::ALL.choose(&mut r).unwrap()) },
            ]
        }
        Category::Counting => vec![SemanticTuple::Count {
            shape: *Shape::ALL.choose(&mut r).unwrap(),
            n: r.random_range(2..=4),
        }],
        Category::Color => vec![SemanticTuple::ColorBinding {
            shape: *Shape::ALL.choose(&mut r).unwrap(),
            color: *Color::ALL.choose(&mut r).unwrap(),
        }],
        Category::Position => {
            let (s1, s2) = two_shapes(&mut r);
            let a = Object::new(s1, *Color::ALL.choose(&mut r).unwrap());
            let b = Object::new(s2, *Color::ALL.choose(&mut r).unwrap());
            let rel = *SpatialRelation::ALL.choose(&mut r).unwrap();
            vec![
                SemanticTuple::Exists { object: a },
                SemanticTuple::Exists { object: b },
                SemanticTuple::Relation { a, b, rel },
            ]
        }
        Category::ColorAttr => {
            let (s1, s2) = two_shapes(&mut r);
            let colors: Vec<Color> = Color::ALL.choose_multiple(&mut r, 2).copied().collect();
            vec![
                SemanticTuple::ColorBinding { shape: s1, color: colors[0] },
                SemanticTuple::ColorBinding { shape: s2, color: colors[1] },
            ]
        }
    };
    PromptSpec::new(seed, category, tuples).expect("generated tuples follow their category")
}
