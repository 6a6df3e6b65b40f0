//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator whose seed is a SplitMix64 hash of the
//! master seed and a short key path, e.g. `(seed, VMC, walker, block)`. The
//! same key path always yields the same stream, independent of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Key-path tags for the different consumers of randomness, spelled in ASCII.
#[allow(clippy::unusual_byte_groupings)]
pub mod tag {
    pub const INIT: u64 = 0x494e_4954;
    pub const VMC: u64 = 0x564d_43;
    pub const DMC: u64 = 0x444d_43;
    pub const BRANCH: u64 = 0x4252_4e43_48;
    pub const COST: u64 = 0x434f_5354;
    pub const BOOTSTRAP: u64 = 0x424f_4f54;
    pub const STUDY: u64 = 0x5354_5544_59;
}

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a seed and key path into a single 64-bit stream seed.
pub fn derive(seed: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(seed), |h, &k| splitmix64(h ^ splitmix64(k)))
}

/// Derives a seed from a master seed and a text label (FNV-1a over the label).
pub fn derive_labeled(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    derive(seed, &[h])
}

pub fn stream(seed: u64, keys: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive(seed, keys))
}
