//! Seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from the single
//! run seed plus a fixed tuple of counters, so results do not depend on the
//! order in which parallel work is scheduled.
//!
//! | stream                    | key                                   |
//! |---------------------------|---------------------------------------|
//! | initial fit, run `i`      | `(seed, STREAM_FIT, i)`               |
//! | rolling chunk `t`         | `(seed, STREAM_CHUNK, t)`             |
//! | detection replicate `r`   | `(seed, STREAM_DETECT, k, t, r)`      |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_FIT: u64 = 1;
pub const STREAM_CHUNK: u64 = 2;
pub const STREAM_DETECT: u64 = 3;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Folds a counter tuple into a 64-bit seed.
pub fn derive(seed: u64, counters: &[u64]) -> u64 {
    counters
        .iter()
        .fold(splitmix64(seed), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

pub fn rng(seed: u64, counters: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, counters))
}
