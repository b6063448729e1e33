//! Seed derivation.
//!
//! Every random stream in the pipeline is a ChaCha generator keyed by a
//! 64-bit seed derived from the run seed and a tuple of stream coordinates
//! (stage name, account, epoch, batch). Streams therefore do not depend on
//! how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mix a sequence of coordinates into one seed.
pub fn derive(seed: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(seed), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

/// Seed for a named stage: FNV-1a over the name, then mixed with the seed.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    derive(seed, &[h])
}

pub fn stream(seed: u64, coords: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive(seed, coords))
}
