//! Deterministic, splittable random streams.
//!
//! Every stochastic operation in this crate draws from a [`StreamRng`] derived
//! from a [`RngKey`]. Keys form a tree: a root key is built from the master
//! seed, and children are derived by mixing in integer or string path
//! components. Two keys with different paths yield statistically independent
//! streams, and the derivation is a pure function of (seed, path), so results
//! are reproducible bit-for-bit regardless of execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The concrete RNG handed to samplers and classifiers.
pub type StreamRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer. Full-period bit mixer used for key derivation.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A position in the derivation tree. Copy-cheap; pass by value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngKey {
    state: u64,
}

impl RngKey {
    /// Root key for a master seed.
    pub fn root(seed: u64) -> Self {
        RngKey {
            state: mix64(seed.wrapping_add(GOLDEN_GAMMA)),
        }
    }

    /// Child key for an integer path component (e.g. a trial index).
    pub fn child(self, index: u64) -> Self {
        RngKey {
            state: mix64(self.state ^ mix64(index.wrapping_mul(GOLDEN_GAMMA).wrapping_add(1))),
        }
    }

    /// Child key for a named experiment. The label is FNV-1a hashed so the
    /// derivation depends only on the bytes, not on pointer identity.
    pub fn child_label(self, label: &str) -> Self {
        self.child(fnv1a_64(label.as_bytes()))
    }

    /// Instantiate the stream at this key.
    pub fn stream(self) -> StreamRng {
        StreamRng::seed_from_u64(self.state)
    }
}

/// 64-bit FNV-1a. Also the partition hash primitive; bit-exact across
/// platforms.
pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    const OFFSET_BASIS: u64 = 14_695_981_039_346_656_037;
    const PRIME: u64 = 1_099_511_628_211;
    let mut h = OFFSET_BASIS;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(PRIME);
    }
    h
}
