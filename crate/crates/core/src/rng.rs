//! Deterministic random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream derived from the
//! master seed and a 64-bit stream id. The id packs a concern tag with the
//! epoch and step counters, so streams never overlap and the value drawn for
//! a given (epoch, step) does not depend on what else ran before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Concern {
    EnvReset = 1,
    RandomPolicy = 2,
    ModelInit = 3,
    ModelShuffle = 4,
    Planner = 5,
    Fixture = 0xff,
}

const EPOCH_BITS: u32 = 24;
const STEP_BITS: u32 = 24;

pub fn stream_id(concern: Concern, epoch: u64, step: u64) -> u64 {
    debug_assert!(epoch < (1 << EPOCH_BITS) && step < (1 << STEP_BITS));
    ((concern as u64) << (EPOCH_BITS + STEP_BITS)) | (epoch << STEP_BITS) | step
}

/// Stream for `concern` at `(epoch, step)` under `seed`.
pub fn stream(seed: u64, concern: Concern, epoch: u64, step: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(concern, epoch, step));
    rng
}

/// Convenience for tests and one-off draws.
pub fn seeded(seed: u64) -> StreamRng {
    stream(seed, Concern::Fixture, 0, 0)
}
