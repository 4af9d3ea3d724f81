//! Deterministic counter-based RNG and seed derivation.
//!
//! The generator is SplitMix64 run in counter mode: the `n`-th output is
//! `mix64(key + n * GOLDEN)`, so a stream is fully identified by its 64-bit
//! key and every output depends only on integer arithmetic. Streams are
//! therefore bit-identical across platforms.
//!
//! Substreams (one per scout, per simulated day, per scouting refresh) are
//! keyed with [`derive_seed`]:
//!
//! ```text
//! child = mix64(parent + mix64(tag + GOLDEN))
//! ```
//!
//! The rule is part of the on-disk reproducibility contract; changing it
//! invalidates every golden file.

use rand_core::RngCore;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream tag for the scouting run of a season refresh.
pub const TAG_SCOUT_REFRESH: u64 = 0x5C07_0000_0000_0000;
/// Stream tag for the foraging draws of one day.
pub const TAG_FORAGING_DAY: u64 = 0xF0A6_0000_0000_0000;
/// Stream tag for weather synthesis.
pub const TAG_WEATHER: u64 = 0x3EA7_0000_0000_0000;

/// The SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child stream key from a parent key and a tag (scout index,
/// day number, refresh counter, ...).
#[inline]
pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    mix64(parent.wrapping_add(mix64(tag.wrapping_add(GOLDEN))))
}

/// SplitMix64 in counter mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimRng {
    key: u64,
    counter: u64,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self { key: seed, counter: 0 }
    }

    /// A generator for substream `tag` of `parent`.
    pub fn substream(parent: u64, tag: u64) -> Self {
        Self::new(derive_seed(parent, tag))
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}

impl RngCore for SimRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        rand_core::impls::fill_bytes_via_next(self, dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_outputs_match_reference_splitmix64() {
        // Reference SplitMix64 with state 0: state += GOLDEN; mix(state).
        let mut rng = SimRng::new(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(rng.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = SimRng::new(42);
        let mut b = SimRng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn substreams_differ() {
        let a = derive_seed(7, 0);
        let b = derive_seed(7, 1);
        let c = derive_seed(8, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_is_in_unit_interval() {
        let mut rng = SimRng::new(1);
        for _ in 0..10_000 {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }
}
