//! Seeded random streams.
//!
//! Every stochastic component draws from its own ChaCha stream so that, for a
//! given seed, policy randomness and environment randomness never overlap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

/// Stream identifiers. Distinct streams of the same seed are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Policy = 0,
    Environment = 1,
    Fit = 2,
}

pub fn stream_rng(seed: u64, stream: Stream) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
