//! Seeded, portable random number generation.
//!
//! Every sampler takes an explicit `u64` seed and draws from ChaCha8, whose
//! output stream is fixed across platforms and releases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
