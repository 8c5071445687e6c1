//! Seeded random streams. Each consumer draws from its own ChaCha stream so
//! that changing how much one consumer samples (say, the history length)
//! leaves every other consumer's draws untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Placement,
    History,
    Realization,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Placement => 1,
            Stream::History => 2,
            Stream::Realization => 3,
        }
    }
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    stream_rng_indexed(seed, stream, 0)
}

/// Like [`stream_rng`] but with a sub-index, used for per-device histories.
pub fn stream_rng_indexed(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream.id() << 32) | index);
    rng
}
