//! Keyed random substreams.
//!
//! Every stochastic component draws from a ChaCha8 stream whose 64-bit seed
//! is derived from a base seed and a tuple of integer keys. Keys are folded
//! in order with the SplitMix64 finalizer:
//!
//! ```text
//! h = splitmix(base)
//! for k in keys: h = splitmix(h ^ splitmix(k + 0x9E3779B97F4A7C15))
//! ```
//!
//! The stream is then `ChaCha8Rng::seed_from_u64(h)`. Both steps are pure
//! integer arithmetic, so streams are identical on every platform and
//! independent of how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Role tags mixed into substream keys; distinct consumers of the same
/// (seed, repeat, fold) never share a stream.
pub mod role {
    pub const SYNTH: u64 = 1;
    pub const FOLDS: u64 = 2;
    pub const CLASSIFIER: u64 = 3;
    pub const FOREST_TREE: u64 = 4;
    pub const FOREST_PRELIMINARY: u64 = 5;
    pub const SVM_PAIR: u64 = 6;
    pub const VALIDATION: u64 = 7;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and an ordered list of keys.
pub fn derive_seed(base: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix(base), |h, &k| {
        splitmix(h ^ splitmix(k.wrapping_add(0x9E37_79B9_7F4A_7C15)))
    })
}

pub fn substream(base: u64, keys: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(base, keys))
}
