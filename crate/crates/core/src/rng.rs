//! Seeded randomness.
//!
//! Every random choice in the crate draws from ChaCha8 (`rand_chacha`), seeded with
//! `SeedableRng::seed_from_u64`. Independent consumers of one user seed get their
//! own ChaCha stream id, so results do not depend on call order and are identical
//! across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type TfcRng = ChaCha8Rng;

/// Stream ids reserved per consumer.
pub mod stream {
    pub const SPARSIFY: u64 = 1;
    pub const RANDOM_BASELINE: u64 = 2;
    pub const GENERATOR: u64 = 3;
    /// Repetition `k` of a randomized rounding uses `ROUNDING + k`.
    pub const ROUNDING: u64 = 1 << 32;
}

pub fn seeded(seed: u64) -> TfcRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A generator for `(seed, stream)`; distinct streams never overlap.
pub fn split(seed: u64, stream: u64) -> TfcRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform index in `0..n`, drawn through `u64` so the stream is platform independent.
pub fn index<R: Rng + ?Sized>(rng: &mut R, n: usize) -> usize {
    rng.gen_range(0..n as u64) as usize
}
