use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRID_SIDE: usize = 4;
pub const GRID_CELLS: usize = GRID_SIDE * GRID_SIDE;
pub const NUM_SHAPES: usize = 3;
pub const NUM_COLORS: usize = 4;
pub const NUM_OBJECTS: usize = NUM_SHAPES * NUM_COLORS;
/// `EMPTY` plus one token per (shape, color).
pub const IMAGE_VOCAB: usize = NUM_OBJECTS + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Square,
    Circle,
    Triangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Color {
    Red,
    Blue,
    Green,
    Yellow,
}

impl Shape {
    pub const ALL: [Shape; NUM_SHAPES] = [Shape::Square, Shape::Circle, Shape::Triangle];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Shape::Square => "square",
            Shape::Circle => "circle",
            Shape::Triangle => "triangle",
        }
    }
}

impl Color {
    pub const ALL: [Color; NUM_COLORS] = [Color::Red, Color::Blue, Color::Green, Color::Yellow];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Blue => "blue",
            Color::Green => "green",
            Color::Yellow => "yellow",
        }
    }
}

impl FromStr for Shape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Shape::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown shape `{s}`")))
    }
}

impl FromStr for Color {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Color::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown color `{s}`")))
    }
}

/// An object descriptor: a (shape, color) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Object {
    pub shape: Shape,
    pub color: Color,
}

impl Object {
    pub const fn new(shape: Shape, color: Color) -> Self {
        Self { shape, color }
    }

    pub fn token(self) -> CellToken {
        CellToken((1 + self.shape.index() * NUM_COLORS + self.color.index()) as u8)
    }

    /// Index in `0..NUM_OBJECTS`.
    pub fn index(self) -> usize {
        self.shape.index() * NUM_COLORS + self.color.index()
    }

    pub fn from_index(i: usize) -> Self {
        Self::new(Shape::ALL[i / NUM_COLORS], Color::ALL[i % NUM_COLORS])
    }

    pub fn all() -> impl Iterator<Item = Object> {
        (0..NUM_OBJECTS).map(Object::from_index)
    }
}

impl fmt::Display for Object {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.color.name(), self.shape.name())
    }
}

/// One grid cell. Id 0 is `EMPTY`; ids `1..=12` are the (shape, color) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct CellToken(u8);

impl CellToken {
    pub const EMPTY: CellToken = CellToken(0);

    pub fn from_id(id: u8) -> Result<Self> {
        if (id as usize) < IMAGE_VOCAB {
            Ok(CellToken(id))
        } else {
            Err(Error::InvalidInput(format!("cell token id {id} out of range")))
        }
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn object(self) -> Option<Object> {
        (self.0 != 0).then(|| Object::from_index(self.0 as usize - 1))
    }

    pub fn shape(self) -> Option<Shape> {
        self.object().map(|o| o.shape)
    }
}

impl From<Object> for CellToken {
    fn from(o: Object) -> Self {
        o.token()
    }
}

/// A row-major 4x4 grid of cell tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct GridImage {
    cells: [CellToken; GRID_CELLS],
}

impl GridImage {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_ids(ids: &[u8]) -> Result<Self> {
        if ids.len() != GRID_CELLS {
            return Err(Error::InvalidInput(format!(
                "grid needs {GRID_CELLS} cells, got {}",
                ids.len()
            )));
        }
        let mut cells = [CellToken::EMPTY; GRID_CELLS];
        for (c, &id) in cells.iter_mut().zip(ids) {
            *c = CellToken::from_id(id)?;
        }
        Ok(Self { cells })
    }

    pub fn ids(&self) -> [u8; GRID_CELLS] {
        self.cells.map(CellToken::id)
    }

    pub fn cells(&self) -> &[CellToken; GRID_CELLS] {
        &self.cells
    }

    pub fn get(&self, i: usize) -> CellToken {
        self.cells[i]
    }

    pub fn set(&mut self, i: usize, t: CellToken) {
        self.cells[i] = t;
    }

    pub fn count_object(&self, o: Object) -> usize {
        let t = o.token();
        self.cells.iter().filter(|&&c| c == t).count()
    }

    pub fn count_shape(&self, s: Shape) -> usize {
        self.cells.iter().filter(|c| c.shape() == Some(s)).count()
    }

    pub fn contains(&self, o: Object) -> bool {
        self.count_object(o) > 0
    }

    pub fn positions_of(&self, o: Object) -> impl Iterator<Item = usize> + '_ {
        let t = o.token();
        (0..GRID_CELLS).filter(move |&i| self.cells[i] == t)
    }

    /// Mean (row, col) of every cell holding `o`.
    pub fn centroid(&self, o: Object) -> Option<(f64, f64)> {
        let (mut n, mut r, mut c) = (0usize, 0usize, 0usize);
        for i in self.positions_of(o) {
            n += 1;
            r += i / GRID_SIDE;
            c += i % GRID_SIDE;
        }
        (n > 0).then(|| (r as f64 / n as f64, c as f64 / n as f64))
    }

    pub fn occupied(&self) -> usize {
        self.cells.iter().filter(|c| !c.is_empty()).count()
    }
}

impl TryFrom<Vec<u8>> for GridImage {
    type Error = Error;
    fn try_from(v: Vec<u8>) -> Result<Self> {
        GridImage::from_ids(&v)
    }
}

impl From<GridImage> for Vec<u8> {
    fn from(g: GridImage) -> Self {
        g.ids().to_vec()
    }
}

pub fn row_of(i: usize) -> usize {
    i / GRID_SIDE
}

pub fn col_of(i: usize) -> usize {
    i % GRID_SIDE
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_ids_biject_with_objects() {
        let mut seen = [false; IMAGE_VOCAB];
        seen[CellToken::EMPTY.id() as usize] = true;
        for o in Object::all() {
            let t = o.token();
            assert!(!seen[t.id() as usize]);
            seen[t.id() as usize] = true;
            assert_eq!(t.object(), Some(o));
        }
        assert!(seen.iter().all(|&s| s));
        assert!(CellToken::from_id(13).is_err());
    }

    #[test]
    fn grid_rejects_wrong_length() {
        assert!(GridImage::from_ids(&[0; 15]).is_err());
        assert!(GridImage::from_ids(&[0; 16]).is_ok());
    }

    #[test]
    fn grid_serializes_as_ids() {
        let mut g = GridImage::empty();
        g.set(3, Object::new(Shape::Circle, Color::Blue).token());
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, "[0,0,0,6,0,0,0,0,0,0,0,0,0,0,0,0]");
        let back: GridImage = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<GridImage>("[0,99,0,0,0,0,0,0,0,0,0,0,0,0,0,0]").is_err());
    }
}
