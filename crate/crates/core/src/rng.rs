//! Seeded random streams.
//!
//! Every stochastic routine takes a `u64` seed. Independent pieces of work
//! (replications, groups, markers) draw from disjoint ChaCha streams of the
//! same seed, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `stream` of `seed`; stream 0 is the same as [`seeded`].
pub fn stream(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A child seed: the first draw of stream `stream` of `seed`.
pub fn derive_seed(seed: u64, stream_id: u64) -> u64 {
    use rand::Rng;
    stream(seed, stream_id).random()
}
