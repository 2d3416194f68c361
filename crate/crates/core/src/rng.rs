//! Portable sampling on top of ChaCha8.
//!
//! Every draw is defined in terms of `next_u64` alone so that a seed yields the
//! same sequence on every platform and in any reimplementation that follows
//! the same recipe. Identifier: [`ALGORITHM_ID`].

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// ChaCha8 seeded through `rand_core`'s PCG32-based `seed_from_u64`
/// expansion; uniform integers by rejection, unit floats from the top 53 bits.
pub const ALGORITHM_ID: &str = "chacha8/seed_from_u64/u64-rejection/f64-53bit";

pub(crate) struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub(crate) fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Uniform integer in `0..bound`. `bound` must be non-zero.
    pub(crate) fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        // Largest multiple of `bound` that fits; reject the tail.
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.rng.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    /// Uniform integer in `lo..=hi`.
    pub(crate) fn in_range(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        match (hi - lo).checked_add(1) {
            Some(span) => lo + self.below(span),
            None => self.rng.next_u64(),
        }
    }

    /// Uniform float in `[0, 1)`.
    pub(crate) fn unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Fisher-Yates, walking from the back.
    pub(crate) fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
