//! Seed derivation.
//!
//! Every random decision in the optimizers draws from a ChaCha8 stream keyed by
//! `(seed, tag, a, b)`, so results never depend on evaluation order or on the
//! number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub(crate) const TAG_INIT: u64 = 0x1;
pub(crate) const TAG_GENERATION: u64 = 0x2;
pub(crate) const TAG_GROUPING: u64 = 0x3;
pub(crate) const TAG_RUN: u64 = 0x4;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mix(seed: u64, tag: u64, a: u64, b: u64) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ tag);
    h = splitmix64(h ^ a);
    splitmix64(h ^ b)
}

pub fn substream(seed: u64, tag: u64, a: u64, b: u64) -> Rng {
    Rng::seed_from_u64(mix(seed, tag, a, b))
}

/// Seed for independent run `run` of a campaign keyed by `master_seed`.
pub fn run_seed(master_seed: u64, run: u64) -> u64 {
    mix(master_seed, TAG_RUN, run, 0)
}
