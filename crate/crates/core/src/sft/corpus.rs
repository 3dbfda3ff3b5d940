use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::world::{
    qa_score, render_reason, Category, Color, GridImage, Object, PromptSpec, ReasonText, SemanticTuple,
    Shape, SpatialRelation, GRID_CELLS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredImage {
    pub cells: GridImage,
    pub score: f64,
    pub reason: ReasonText,
}

impl ScoredImage {
    pub fn score(prompt: &PromptSpec, image: GridImage) -> Self {
        Self { cells: image, score: qa_score(prompt, &image), reason: render_reason(prompt, &image) }
    }
}

/// One prompt with its images sorted by score, highest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CorpusRecord", into = "CorpusRecord")]
pub struct CorpusEntry {
    pub prompt: PromptSpec,
    pub images: Vec<ScoredImage>,
}

#[derive(Serialize, Deserialize)]
struct CorpusRecord {
    prompt_id: u64,
    category: Category,
    surface: String,
    tuples: Vec<SemanticTuple>,
    images: Vec<ScoredImage>,
}

impl From<CorpusEntry> for CorpusRecord {
    fn from(e: CorpusEntry) -> Self {
        Self {
            prompt_id: e.prompt.id,
            category: e.prompt.category,
            surface: e.prompt.surface,
            tuples: e.prompt.tuples,
            images: e.images,
        }
    }
}

impl TryFrom<CorpusRecord> for CorpusEntry {
    type Error = Error;

    fn try_from(r: CorpusRecord) -> Result<Self> {
        let prompt = PromptSpec::new(r.prompt_id, r.category, r.tuples)?;
        if prompt.surface != r.surface {
            return Err(Error::InvalidInput(format!("surface {:?} does not match tuples", r.surface)));
        }
        Ok(Self { prompt, images: r.images })
    }
}

impl CorpusEntry {
    /// Score `images` and sort them by `(-score, original index)`.
    pub fn new(prompt: PromptSpec, images: Vec<GridImage>) -> Self {
        let mut scored: Vec<ScoredImage> = images.into_iter().map(|g| ScoredImage::score(&prompt, g)).collect();
        scored.sort_by(|a, b| b.score.total_cmp(&a.score));
        Self { prompt, images: scored }
    }
}

/// Mixture of the two synthetic generator policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorMix {
    /// Probability that an image comes from the planted synthesizer.
    pub synth_weight: f64,
    /// Cell occupancy of the random policy.
    pub random_occupancy: f64,
    /// Probability that the synthesizer misses one tuple of the prompt.
    pub corruption: f64,
}

impl Default for GeneratorMix {
    fn default() -> Self {
        Self { synth_weight: 0.5, random_occupancy: 0.3, corruption: 0.3 }
    }
}

impl GeneratorMix {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("synth_weight", self.synth_weight),
            ("random_occupancy", self.random_occupancy),
            ("corruption", self.corruption),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    pub fn draw(&self, prompt: &PromptSpec, r: &mut rng::Rng) -> GridImage {
        if r.random_bool(self.synth_weight) {
            if r.random_bool(self.corruption) {
                synthesize_near_miss(prompt, r)
            } else {
                synthesize(prompt, r)
            }
        } else {
            random_image(self.random_occupancy, r)
        }
    }
}

/// Each cell independently holds a uniform object with probability `occupancy`.
pub fn random_image(occupancy: f64, r: &mut rng::Rng) -> GridImage {
    let mut g = GridImage::empty();
    for i in 0..GRID_CELLS {
        if r.random_bool(occupancy) {
            g.set(i, Object::from_index(r.random_range(0..crate::world::NUM_OBJECTS)).token());
        }
    }
    g
}

fn required_objects(prompt: &PromptSpec, r: &mut rng::Rng) -> Vec<Object> {
    let mut out = Vec::new();
    for t in &prompt.tuples {
        match *t {
            SemanticTuple::Exists { object } => out.push(object),
            SemanticTuple::Count { shape, n } => {
                out.extend((0..n).map(|_| Object::new(shape, *Color::ALL.choose(r).unwrap())))
            }
            SemanticTuple::ColorBinding { shape, color } => {
                out.extend((0..r.random_range(1..=2)).map(|_| Object::new(shape, color)))
            }
            SemanticTuple::Relation { .. } => {}
        }
    }
    out
}

fn try_synthesize(prompt: &PromptSpec, r: &mut rng::Rng, attempts: usize) -> Option<GridImage> {
    for attempt in 0..attempts {
        let objects = required_objects(prompt, r);
        let distractors = if attempt < 50 { r.random_range(0..=2) } else { 0 };
        let mut cells: Vec<usize> = (0..GRID_CELLS).collect();
        cells.shuffle(r);
        let mut g = GridImage::empty();
        for (&cell, &o) in cells.iter().zip(&objects) {
            g.set(cell, o.token());
        }
        for &cell in cells[objects.len()..].iter().take(distractors) {
            let o = Object::new(*Shape::ALL.choose(r).unwrap(), *Color::ALL.choose(r).unwrap());
            g.set(cell, o.token());
        }
        if qa_score(prompt, &g) == 1.0 {
            return Some(g);
        }
    }
    None
}

/// An image that satisfies every tuple of `prompt`, possibly with harmless
/// distractor objects.
pub fn synthesize(prompt: &PromptSpec, r: &mut rng::Rng) -> GridImage {
    try_synthesize(prompt, r, usize::MAX).unwrap()
}

fn other_color(c: Color, r: &mut rng::Rng) -> Color {
    let others: Vec<Color> = Color::ALL.into_iter().filter(|&x| x != c).collect();
    *others.choose(r).unwrap()
}

fn miss(t: &SemanticTuple, r: &mut rng::Rng) -> SemanticTuple {
    match *t {
        SemanticTuple::Exists { object } => SemanticTuple::Exists {
            object: Object::new(object.shape, other_color(object.color, r)),
        },
        SemanticTuple::Count { shape, n } => {
            let n = if n <= 1 || (n < 4 && r.random_bool(0.5)) { n + 1 } else { n - 1 };
            SemanticTuple::Count { shape, n }
        }
        SemanticTuple::ColorBinding { shape, color } => {
            SemanticTuple::ColorBinding { shape, color: other_color(color, r) }
        }
        SemanticTuple::Relation { a, b, rel } => {
            let rel = match rel {
                SpatialRelation::LeftOf => SpatialRelation::RightOf,
                SpatialRelation::RightOf => SpatialRelation::LeftOf,
                SpatialRelation::Above => SpatialRelation::Below,
                SpatialRelation::Below => SpatialRelation::Above,
            };
            SemanticTuple::Relation { a, b, rel }
        }
    }
}

/// The synthesizer aimed at a copy of `prompt` with one tuple changed: a
/// wrong color, a count off by one, or the opposite relation. Falls back to a faithful image when the changed prompt cannot
/// be drawn.
pub fn synthesize_near_miss(prompt: &PromptSpec, r: &mut rng::Rng) -> GridImage {
    let k = r.random_range(0..prompt.tuples.len());
    let mut tuples = prompt.tuples.clone();
    tuples[k] = miss(&tuples[k], r);
    PromptSpec::new(prompt.id, prompt.category, tuples)
        .ok()
        .and_then(|p| try_synthesize(&p, r, 200))
        .unwrap_or_else(|| synthesize(prompt, r))
}

/// Build `n` corpus entries of `m` images each. Prompts cycle through the
/// categories; entry `i` uses prompt seed `derive(seed, [CORPUS, i])`.
pub fn build_corpus(mix: &GeneratorMix, n: usize, m: usize, seed: u64) -> Result<Vec<CorpusEntry>> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput("corpus needs N, M >= 1".into()));
    }
    mix.validate()?;
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let s = rng::derive(seed, &[rng::stream::CORPUS, i as u64]);
            let prompt = crate::world::gen_prompt(Category::ALL[i % Category::ALL.len()], s);
            let mut r = rng::rng(rng::derive(s, &[1]));
            let images = (0..m).map(|_| mix.draw(&prompt, &mut r)).collect();
            CorpusEntry::new(prompt, images)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_are_sorted_and_scored() {
        let c = build_corpus(&GeneratorMix::default(), 24, 8, 3).unwrap();
        assert_eq!(c.len(), 24);
        for (i, e) in c.iter().enumerate() {
            assert_eq!(e.prompt.category, Category::ALL[i % 6]);
            assert_eq!(e.images.len(), 8);
            assert!(e.images.windows(2).all(|w| w[0].score >= w[1].score));
            for s in &e.images {
                assert_eq!(s.score, qa_score(&e.prompt, &s.cells));
            }
        }
        assert!(build_corpus(&GeneratorMix::default(), 0, 8, 3).is_err());
        assert_eq!(c, build_corpus(&GeneratorMix::default(), 24, 8, 3).unwrap());
    }

    #[test]
    fn synthesized_images_satisfy_the_prompt() {
        let mut r = rng::rng(4);
        for (i, c) in Category::ALL.iter().cycle().take(120).enumerate() {
            let p = crate::world::gen_prompt(*c, i as u64);
            assert_eq!(qa_score(&p, &synthesize(&p, &mut r)), 1.0);
        }
    }

    #[test]
    fn corpus_lines_round_trip_and_reject_tampering() {
        let c = build_corpus(&GeneratorMix::default(), 3, 2, 8).unwrap();
        let line = serde_json::to_string(&c[1]).unwrap();
        let back: CorpusEntry = serde_json::from_str(&line).unwrap();
        assert_eq!(back, c[1]);
        let tampered = line.replace(&c[1].prompt.surface, "a red ghost");
        assert!(serde_json::from_str::<CorpusEntry>(&tampered).is_err());
    }

    #[test]
    fn mix_validation() {
        assert!(GeneratorMix::default().validate().is_ok());
        assert!(GeneratorMix { synth_weight: 1.5, ..GeneratorMix::default() }.validate().is_err());
    }
}
