//! Named, counter-based random streams.
//!
//! Every random draw in training and synthesis comes from a ChaCha stream
//! keyed by the run seed plus a path of integer tags (purpose, epoch, batch,
//! column, row...). Two draws with the same path are identical regardless of
//! what else was drawn before them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags used as the first element of a stream path.
pub mod purpose {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const ENCODER_NOISE: u64 = 3;
    pub const QUANTILE_LEVEL: u64 = 4;
    pub const GUMBEL: u64 = 5;
    pub const PRIOR: u64 = 6;
    pub const GENERATE: u64 = 7;
    pub const SPLIT: u64 = 8;
    pub const KMEANS: u64 = 9;
    pub const FOREST: u64 = 10;
    pub const LATENT_SCATTER: u64 = 11;
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic generator for `(seed, path)`.
pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut state = splitmix(seed);
    for &tag in path {
        state = splitmix(state ^ splitmix(tag.wrapping_add(0xA5A5_A5A5)));
    }
    let mut key = [0u8; 32];
    let mut s = state;
    for chunk in key.chunks_mut(8) {
        s = splitmix(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
