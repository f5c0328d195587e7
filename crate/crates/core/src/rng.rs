//! Seeded random streams.
//!
//! Every random decision in the crate flows from a `u64` run seed. Independent
//! consumers take their own ChaCha stream so that adding draws in one place
//! never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Well-known stream ids.
pub mod stream {
    pub const SEEDS: u64 = 1;
    pub const INIT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const GENERATE: u64 = 4;
    pub const ACCEPT: u64 = 5;
    pub const FEEDBACK: u64 = 6;
    pub const REPLAY: u64 = 7;
}

pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a run seed with an index (seed number, repeat number, round) into a
/// fresh seed. SplitMix64 finalizer.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
