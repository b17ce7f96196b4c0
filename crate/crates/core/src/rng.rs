//! Seed derivation. Every random consumer gets its own ChaCha stream keyed by
//! the master seed plus a (purpose, index) pair, so results do not depend on
//! the order in which consumers draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Purposes that own a family of random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Population = 1,
    AgentInit = 2,
    AgentPolicy = 3,
    Fading = 4,
    Baseline = 5,
}

pub fn stream(master: u64, purpose: Stream, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((purpose as u64) << 48) ^ index);
    rng
}
