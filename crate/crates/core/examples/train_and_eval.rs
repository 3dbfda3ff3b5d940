//! One seeded run at default settings: SFT, RL, and held-out scores after each.
//!
//! `cargo run --release --example train_and_eval -- 3` trains with seed 3.

use reflectgen::eval::{consistency_ratio, eval_t2i, gen_labeled_pairs, AhaMode, EvalSuite};
use reflectgen::introspect::EpisodeConfig;
use reflectgen::policy::PolicyParams;
use reflectgen::sft::GeneratorMix;
use reflectgen::trainer::{train_rl, train_sft, RlConfig, SftConfig};

fn report(stage: &str, p: &PolicyParams, suite: &EvalSuite) {
    let f = eval_t2i(p, suite, AhaMode::Both, &EpisodeConfig::default(), 0);
    let (with, without) = (f.with_aha.unwrap(), f.without_aha.unwrap());
    let pairs = gen_labeled_pairs(1000, &GeneratorMix::default(), 0);
    println!(
        "{stage}: with-aha {:.3}  without-aha {:.3}  mean rounds {:.3}  consistency {:.3}",
        with.overall,
        without.overall,
        with.mean_rounds,
        consistency_ratio(p, &pairs, 1.0)
    );
}

fn main() -> Result<(), reflectgen::Error> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let suite = EvalSuite::default_suite();

    let sft = train_sft(&SftConfig { seed, ..SftConfig::default() }, None, None)?;
    report("post-sft", &sft.params, &suite);
    let rl = train_rl(&RlConfig { seed, ..RlConfig::default() }, &sft.params, None)?;
    report("post-rl", &rl.params, &suite);
    Ok(())
}
