#![allow(dead_code)]

use rand::Rng as _;
use reflectgen::policy::{text_vocab, Context, FeatureConfig, PolicyParams, PriorRound};
use reflectgen::rng;
use reflectgen::sft::SftTarget;
use reflectgen::world::{gen_prompt, render_reason, Category, EditTask, GridImage, GRID_CELLS, IMAGE_VOCAB};

pub fn random_params(seed: u64, scale: f64) -> PolicyParams {
    let config = FeatureConfig::default();
    let mut r = rng::rng(seed);
    let w = (0..config.num_params()).map(|_| r.random_range(-scale..=scale)).collect();
    PolicyParams::from_weights(config, w).unwrap()
}

pub fn random_image(r: &mut rng::Rng) -> GridImage {
    let ids: Vec<u8> = (0..GRID_CELLS).map(|_| r.random_range(0..IMAGE_VOCAB as u8)).collect();
    GridImage::from_ids(&ids).unwrap()
}

/// A grammatical text segment: verdict, up to three reasons, `EOS`.
pub fn random_text(r: &mut rng::Rng) -> Vec<u8> {
    let mut t = vec![if r.random_bool(0.5) { text_vocab::YES } else { text_vocab::NO }];
    for _ in 0..r.random_range(0..=3) {
        t.push(r.random_range(text_vocab::FIRST_REASON..text_vocab::EOS));
    }
    t.push(text_vocab::EOS);
    t
}

pub fn text_target(tokens: &[u8]) -> SftTarget {
    SftTarget::Text {
        yes: tokens[0] == text_vocab::YES,
        reason: tokens.iter().filter_map(|&t| text_vocab::as_reason(t)).collect(),
    }
}

/// Image, text and edit segments under random contexts, as
/// `(context, tokens, guidance scale)`.
pub fn random_instance(r: &mut rng::Rng) -> Vec<(Context, Vec<u8>, f64)> {
    let category = Category::ALL[r.random_range(0..Category::ALL.len())];
    let prompt = gen_prompt(category, r.random());
    let prior: Vec<PriorRound> = (0..r.random_range(0..=2))
        .map(|_| {
            let image = random_image(r);
            PriorRound { image, reason: render_reason(&prompt, &image).codes() }
        })
        .collect();
    let subject = random_image(r);
    let task = EditTask::generate(r.random());
    let mut image_ctx = Context::image(prompt.clone(), prior.clone());
    if r.random_bool(0.25) {
        image_ctx = image_ctx.padded();
    }
    vec![
        (image_ctx, random_image(r).ids().to_vec(), 5.0),
        (Context::text(prompt, prior, subject), random_text(r), if r.random_bool(0.5) { 1.0 } else { 2.0 }),
        (Context::edit(task.source, task.instr), random_image(r).ids().to_vec(), 4.0),
    ]
}
