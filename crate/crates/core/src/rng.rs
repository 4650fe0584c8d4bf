//! Seeded random streams.
//!
//! Every random draw in a run comes from a ChaCha8 generator derived from the
//! run seed. Independent concerns (initialization, batch order and dropout,
//! target disturbance) use separate streams of the same seed, so switching a
//! regularizer on or off never shifts the draws seen by the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

/// Stream ids used by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Training = 2,
    Disturbance = 3,
    Data = 4,
}

pub fn seeded(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

pub fn stream(seed: u64, stream: Stream) -> SeededRng {
    let mut rng = SeededRng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
