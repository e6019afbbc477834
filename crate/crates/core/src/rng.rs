//! Keyed random streams.
//!
//! Every random draw in the toolkit comes from a ChaCha stream selected by
//! `(master seed, purpose, index)`. Work items (subcarriers, sweep trials,
//! solver restarts) each own a stream, so results do not depend on how the
//! work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

/// What a stream is used for. Streams with different purposes never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    MeasurementNoise = 1,
    SolverInit = 2,
    SweepNoise = 3,
    SweepSolverInit = 4,
    Scenario = 5,
    Truth = 6,
}

const INDEX_BITS: u32 = 48;

/// Returns the stream for `(seed, purpose, index)`. `index` must fit in 48 bits.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> StreamRng {
    assert!(index < (1 << INDEX_BITS), "stream index {index} exceeds 48 bits");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << INDEX_BITS) | index);
    rng
}

/// Packs a two-level key (e.g. SNR point and trial) into one stream index.
pub fn pair_index(outer: usize, inner: usize) -> u64 {
    assert!(inner < (1 << 24) && outer < (1 << 24));
    ((outer as u64) << 24) | inner as u64
}
