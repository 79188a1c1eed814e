//! Seeded random streams.
//!
//! Every simulation trial draws from its own ChaCha stream keyed by a base
//! seed and the trial index, so trials are reproducible in isolation and in
//! any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream `stream` of the generator keyed by `seed`.
pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
