//! Named random streams derived from one run seed.
//!
//! Each component draws from its own ChaCha stream, so toggling a feature
//! that consumes randomness in one place never shifts the draws seen by
//! another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Env = 1,
    PolicySample = 2,
    Buffer = 3,
    Subset = 4,
    Init = 5,
    Bootstrap = 6,
    Explore = 7,
    Eval = 8,
    Relabel = 9,
    Probe = 10,
}

/// Returns the generator for `stream` under `seed`.
pub fn stream(seed: u64, stream: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
