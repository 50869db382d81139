//! Seed derivation. Every random stream in the crate descends from a
//! caller-provided seed; nothing reads ambient entropy.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Derives an independent 32-byte seed from a master seed and a label.
pub fn derive_seed(master: u64, label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"shuffledp/seed/v1");
    h.update(master.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.finalize().into()
}

/// A ChaCha20 stream for `label` under `master`.
pub fn stream(master: u64, label: &str) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(derive_seed(master, label))
}

/// Per-trial stream for Monte Carlo harnesses.
pub fn trial_stream(master: u64, trial: u64) -> ChaCha20Rng {
    stream(master, &format!("trial/{trial}"))
}
