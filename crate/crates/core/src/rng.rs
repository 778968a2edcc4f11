//! Seeded random streams.
//!
//! A run owns one seed. Every consumer draws from its own ChaCha stream,
//! keyed by purpose and an index (layer, step, sample, ...), so the values
//! any consumer sees never depend on how many draws another consumer made or
//! on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RunRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Dropout = 2,
    Augment = 3,
    Shuffle = 4,
    Subset = 5,
    Synth = 6,
    Test = 99,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an index from several components (e.g. epoch and sample).
pub fn mix(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243f_6a88_85a3_08d3, |acc, &p| splitmix64(acc ^ p))
}

pub fn stream(seed: u64, purpose: Stream, index: u64) -> RunRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(index)));
    rng.set_stream(purpose as u64);
    rng
}
