//! Stateless, counter-based random numbers.
//!
//! Every random decision in the renderers is a pure function of
//! `(seed, pixel, sample, bounce, dimension)`. No generator state travels
//! with a ray, so a ray produces the same numbers no matter which rank
//! happens to process it.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngKey {
    pub pixel: u32,
    pub sample: u32,
    pub bounce: u16,
    pub dimension: u16,
    pub seed: u64,
}

impl RngKey {
    pub fn new(seed: u64, pixel: u32, sample: u32, bounce: u16, dimension: u16) -> Self {
        RngKey { pixel, sample, bounce, dimension, seed }
    }

    /// Packs the counter fields into one word: pixel in bits 0..32,
    /// dimension in 32..40, bounce in 40..48, and the sample index rotated
    /// into 48..64 (its upper half wraps onto the pixel bits). The packing is
    /// injective for pixel < 2^32, dimension and bounce < 256, sample < 2^16.
    #[inline]
    pub fn counter_word(&self) -> u64 {
        (self.pixel as u64)
            ^ ((self.dimension as u64 & 0xFF) << 32)
            ^ ((self.bounce as u64 & 0xFF) << 40)
            ^ (self.sample as u64).rotate_left(48)
    }

    /// The full 64-bit output before mapping to the unit interval.
    #[inline]
    pub fn bits(&self) -> u64 {
        splitmix64(splitmix64(self.seed) ^ self.counter_word())
    }
}

/// Uniform double in `[0, 1)` from the top 53 bits.
#[inline]
pub fn rng(key: RngKey) -> f64 {
    (key.bits() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Largest `f32` strictly below one.
pub const ONE_MINUS_EPSILON: f32 = 1.0 - f32::EPSILON / 2.0;

/// [`rng`] narrowed to `f32`, still strictly below one.
#[inline]
pub fn rng_f32(key: RngKey) -> f32 {
    (rng(key) as f32).min(ONE_MINUS_EPSILON)
}
