//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` keyed by a 64-bit seed.
//! Child seeds are derived with the splitmix64 finalizer:
//!
//! ```text
//! z  = parent + 0x9E3779B97F4A7C15 * (index + 1)
//! z  = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z  = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! out = z ^ (z >> 31)
//! ```
//!
//! Iteration-level substreams (one per SGD step) reuse the replicate key and
//! select the ChaCha stream id, so no extra seeding work is done per step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for child `index` of `parent`. Injective in `index` for a fixed parent.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    mix64(parent.wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1))))
}

/// FNV-1a hash of a label, used to give each experiment its own seed namespace.
pub fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

pub fn namespaced_seed(master: u64, label: &str) -> u64 {
    mix64(master ^ label_hash(label))
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream `index` of the stream keyed by `seed`.
pub fn substream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
