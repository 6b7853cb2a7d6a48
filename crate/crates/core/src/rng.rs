//! Seeded random streams.
//!
//! Every consumer of randomness in a run draws from its own ChaCha stream,
//! addressed by `(seed, purpose, index)`. Streams never share state, so the
//! order in which components run (or whether they run in parallel) does not
//! change any draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// What a stream is used for; part of the stream address.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    InitialDesign = 1,
    Noise = 2,
    WeightInit = 3,
    Minibatch = 4,
    Restart = 5,
    DiscreteCandidates = 6,
    ProposalRound = 7,
    Study = 8,
}

pub fn substream(seed: u64, purpose: Purpose, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) ^ index);
    rng
}

/// Derives a child seed; used where a config carries a seed for a sub-task.
pub fn derive_seed(seed: u64, purpose: Purpose, index: u64) -> u64 {
    use rand::RngCore;
    substream(seed, purpose, index).next_u64()
}
