//! Seed derivation.
//!
//! All randomness in the crate comes from ChaCha8 streams
//! ([`rand_chacha::ChaCha8Rng`]) seeded by [`stream_seed`], which folds a
//! list of 64-bit keys (run seed, ROI id, plan index, ...) through the
//! SplitMix64 finaliser. A stream therefore depends only on its keys, never
//! on the order in which streams are consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_seed(keys: &[u64]) -> u64 {
    keys.iter().fold(0x6A09_E667_F3BC_C909, |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn stream(keys: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(keys))
}

/// Domain tags keeping streams for different purposes apart.
pub(crate) mod domain {
    pub const NOISE: u64 = 0x4E4F_4953;
    pub const SYNTH: u64 = 0x5359_4E54;
    pub const NORMAL_ROI: u64 = 0x524F_4931;
    pub const SPLIT: u64 = 0x5350_4C54;
    pub const INIT: u64 = 0x494E_4954;
    pub const SHUFFLE: u64 = 0x5348_5546;
    pub const GRADCHECK: u64 = 0x4743_484B;
    pub const EXAM: u64 = 0x4558_414D;
}
