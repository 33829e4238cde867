//! Deterministic seeded randomness (SplitMix64).
//!
//! Everything seed-derived in this crate (synthetic corpora, probe weights)
//! goes through this generator so outputs are bit-identical across
//! platforms and releases.

/// SplitMix64 PRNG. Not cryptographic; stable by construction.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Derive an independent stream for `(seed, tag, index)`.
    ///
    /// Each component passes through a full mix round, so adjacent tags or
    /// indices do not produce correlated streams.
    pub fn derive(seed: u64, tag: u64, index: u64) -> Self {
        let mut s = Self::new(seed);
        let a = s.next_u64();
        let mut t = Self::new(a ^ tag);
        let b = t.next_u64();
        Self::new(b ^ index)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}
