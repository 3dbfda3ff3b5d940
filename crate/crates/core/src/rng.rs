//! Seed derivation.
//!
//! Every stochastic component takes a `u64` seed. Child seeds are split off a
//! master seed with a counter-based mix so that sibling streams (group
//! members, rounds, segments) are independent and reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Domain tags keep seed families apart.
pub mod stream {
    pub const TRAIN_PROMPTS: u64 = 0x7472_6169_6e00;
    pub const EVAL_PROMPTS: u64 = 0x6576_616c_0000;
    pub const CORPUS: u64 = 0x636f_7270_7573;
    pub const EDIT_TRAIN: u64 = 0x6564_6974_0001;
    pub const EDIT_EVAL: u64 = 0x6564_6974_0002;
    pub const ROLLOUT: u64 = 0x726f_6c6c_0000;
    pub const SAMPLER: u64 = 0x6d69_7800_0000;
    pub const EVAL_EPISODES: u64 = 0x6570_6973_0000;
    pub const PAIRS: u64 = 0x7061_6972_0000;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and a path of counters.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
