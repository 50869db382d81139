//! Communication accounting over protocol transcripts.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use shuffledp::crypto::{Ahe, IdentityAhe, Ring};
use shuffledp::mechanisms::{GrrConfig, Mechanism};
use shuffledp::protocol::{peos_run, PeosConfig, Transcript};
use shuffledp::shuffle::{binomial, MessageKind, PartyId};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub n: usize,
    pub r: usize,
    pub n_r: usize,
    pub shuffle_rounds: usize,
    /// `C(r, t)` with `t = floor(r/2) + 1`.
    pub expected_rounds: usize,
    /// Plaintext shares the first user uploads.
    pub user_plain_shares: usize,
    pub user_plain_share_bytes: u64,
    pub user_ciphertexts: usize,
    pub user_ciphertext_bytes: u64,
    /// Mean upload per user.
    pub bytes_per_user: f64,
    /// Bytes sent by each shuffler, in order.
    pub shuffler_bytes: Vec<u64>,
    pub server_bytes: u64,
    pub server_received_bytes: u64,
    pub total_bytes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

pub fn overhead_report(t: &Transcript) -> OverheadReport {
    let mut users_total = 0u64;
    let mut shuffler_bytes = vec![0u64; t.r];
    let mut server_bytes = 0u64;
    let mut server_received_bytes = 0u64;
    let (mut shares, mut share_bytes, mut ciphers, mut cipher_bytes) = (0, 0, 0, 0);
    for rec in &t.records {
        if rec.to == PartyId::Server {
            server_received_bytes += rec.byte_length;
        }
        match rec.from {
            PartyId::User(i) => {
                users_total += rec.byte_length;
                if i == 0 {
                    match rec.kind {
                        MessageKind::UserShare => {
                            shares += 1;
                            share_bytes += rec.byte_length;
                        }
                        MessageKind::UserCiphertext => {
                            ciphers += 1;
                            cipher_bytes += rec.byte_length;
                        }
                        _ => {}
                    }
                }
            }
            PartyId::Shuffler(j) => {
                if let Some(b) = shuffler_bytes.get_mut(j) {
                    *b += rec.byte_length;
                }
            }
            PartyId::Server => server_bytes += rec.byte_length,
        }
    }
    let total_bytes = users_total + shuffler_bytes.iter().sum::<u64>() + server_bytes;
    OverheadReport {
        n: t.n,
        r: t.r,
        n_r: t.n_r,
        shuffle_rounds: t.shuffle_rounds(),
        expected_rounds: binomial(t.r, t.r / 2 + 1),
        user_plain_shares: shares,
        user_plain_share_bytes: share_bytes,
        user_ciphertexts: ciphers,
        user_ciphertext_bytes: cipher_bytes,
        bytes_per_user: users_total as f64 / t.n.max(1) as f64,
        shuffler_bytes,
        server_bytes,
        server_received_bytes,
        total_bytes,
        wall_time_ms: None,
    }
}

/// Runs the protocol on `n` users holding value 0 of a binary GRR and reports
/// its communication. The scheme fixes the ciphertext size; pass
/// [`IdentityAhe::with_ciphertext_len`] to model a real key cheaply.
pub fn simulate_overhead<S: Ahe>(
    n: usize,
    r: usize,
    n_r: usize,
    seed: u64,
    scheme: &S,
    sk: &S::SecretKey,
    record_timing: bool,
) -> Result<OverheadReport> {
    let mechanism = Mechanism::Grr(GrrConfig::new(1.0, 2)?);
    let cfg = PeosConfig::new(mechanism, r, n_r, seed)?.with_ring(scheme.ring())?;
    let values = vec![0usize; n];
    let start = Instant::now();
    let out = peos_run(&values, &cfg, scheme, sk)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let mut report = overhead_report(&out.transcript);
    report.wall_time_ms = record_timing.then_some(elapsed);
    Ok(report)
}

/// Wire length of a ciphertext under a Paillier key with a `bits`-bit
/// modulus: a 12-byte header plus an element of `Z_{N^2}`.
pub fn paillier_ciphertext_len(bits: u64) -> usize {
    12 + (2 * bits as usize).div_ceil(8)
}

/// The encryption double sized like a Paillier key of `bits` bits.
pub fn sized_double(bits: u64) -> IdentityAhe {
    IdentityAhe::new(Ring::default()).with_ciphertext_len(paillier_ciphertext_len(bits))
}
