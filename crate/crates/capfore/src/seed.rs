//! Named sub-seed derivation. All randomness in a run flows from one global
//! seed; each component re-seeds itself with `derive(global, "label")` so
//! components stay independently reproducible.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive a stable sub-seed from a global seed and a label.
///
/// Uses SHA-256 so the mapping is identical across platforms and releases,
/// unlike `std`'s default hasher.
pub fn derive(global: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(global.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Seeded RNG used throughout the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
