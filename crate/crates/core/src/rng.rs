//! Named random streams derived from one global seed.
//!
//! ChaCha8 is used everywhere so sequences are identical across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Train = 1,
    Targets = 2,
    RandomAttack = 3,
    Synthetic = 4,
}

/// Generator for `purpose`, optionally split further by `index` (e.g. target number).
pub fn stream(seed: u64, purpose: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 40) | (index & ((1 << 40) - 1)));
    rng
}
