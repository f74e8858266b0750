//! Counter-based randomness.
//!
//! Every Bernoulli draw made during augmentation or Monte Carlo estimation is
//! a pure function of `(seed, view, stream, index)`. Draws can therefore be
//! taken in any order, or in parallel, and still reproduce bit-for-bit.

/// Which family of elements a draw belongs to. Distinct streams never share
/// bits even when seed, view and index coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    FeatureMask = 1,
    EdgeDeletion = 2,
    MonteCarlo = 3,
    Epoch = 4,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64, view: u64, stream: Stream) -> Self {
        let mut key = mix64(seed.wrapping_add(GOLDEN));
        key = mix64(key ^ view.wrapping_mul(GOLDEN));
        key = mix64(key ^ (stream as u64).wrapping_mul(0xd6e8_feb8_6659_fd93));
        Self { key }
    }

    /// Raw 64 random bits for element `index`.
    #[inline]
    pub fn bits(&self, index: u64) -> u64 {
        mix64(self.key ^ mix64(index.wrapping_add(GOLDEN)))
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&self, index: u64) -> f64 {
        (self.bits(index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `true` with probability `p`. `p <= 0` never fires, `p >= 1` always does.
    #[inline]
    pub fn bernoulli(&self, index: u64, p: f64) -> bool {
        self.uniform(index) < p
    }
}

/// Derives a child seed, e.g. one per training epoch or data split.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    CounterRng::new(seed, label, Stream::Epoch).bits(0)
}
