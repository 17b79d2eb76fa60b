//! Hash-derived deterministic draws.
//!
//! Every random decision in the simulator and the scripted oracle is keyed by
//! a seed plus a list of string parts, so results never depend on call order
//! or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a child seed from `seed` and an ordered list of key parts.
pub fn derive_seed(seed: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

/// Uniform draw in `[0, 1)` keyed by `seed` and `parts`.
pub fn unit_draw(seed: u64, parts: &[&str]) -> f64 {
    (derive_seed(seed, parts) >> 11) as f64 / (1u64 << 53) as f64
}

/// A ChaCha stream keyed by `seed` and `parts`.
pub fn keyed_rng(seed: u64, parts: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, parts))
}
