//! Layered hybrid encryption: each layer is an X25519 key agreement with a
//! fresh ephemeral key followed by ChaCha20-Poly1305 over the inner layer.

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use x25519_dalek::{PublicKey, StaticSecret};

use crate::error::{Error, Result};

const TAG_PAYLOAD: u8 = 0;
const TAG_ENVELOPE: u8 = 1;

/// A party's onion key pair.
#[derive(Clone)]
pub struct OnionKeyPair {
    secret: StaticSecret,
    public: PublicKey,
}

impl OnionKeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let secret = StaticSecret::random_from_rng(rng);
        let public = PublicKey::from(&secret);
        OnionKeyPair { secret, public }
    }

    pub fn public(&self) -> PublicKey {
        self.public
    }
}

impl std::fmt::Debug for OnionKeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "OnionKeyPair({})", hex::encode(self.public.as_bytes()))
    }
}

/// One or more encryption layers. `bytes` is `ephemeral public key (32) |
/// AEAD ciphertext`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnionEnvelope {
    pub bytes: Vec<u8>,
}

impl OnionEnvelope {
    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Peeled {
    Envelope(OnionEnvelope),
    Payload(Vec<u8>),
}

fn layer_key(shared: &[u8; 32], ephemeral: &PublicKey, recipient: &PublicKey) -> ChaCha20Poly1305 {
    let mut h = Sha256::new();
    h.update(b"shuffledp/onion/v1");
    h.update(shared);
    h.update(ephemeral.as_bytes());
    h.update(recipient.as_bytes());
    let key: [u8; 32] = h.finalize().into();
    ChaCha20Poly1305::new(Key::from_slice(&key))
}

fn seal<R: RngCore + CryptoRng>(inner: &[u8], recipient: &PublicKey, rng: &mut R) -> Vec<u8> {
    let eph = StaticSecret::random_from_rng(&mut *rng);
    let eph_pub = PublicKey::from(&eph);
    let shared = eph.diffie_hellman(recipient);
    // every layer uses a fresh key, so a fixed nonce is safe
    let ct = layer_key(shared.as_bytes(), &eph_pub, recipient)
        .encrypt(Nonce::from_slice(&[0u8; 12]), inner)
        .expect("in-memory AEAD encryption cannot fail");
    let mut out = Vec::with_capacity(32 + ct.len());
    out.extend_from_slice(eph_pub.as_bytes());
    out.extend_from_slice(&ct);
    out
}

/// Encrypts `payload` for `recipients`, listed in peeling order: the first
/// recipient removes the outermost layer.
pub fn onion_encrypt<R: RngCore + CryptoRng>(
    payload: &[u8],
    recipients: &[PublicKey],
    rng: &mut R,
) -> Result<OnionEnvelope> {
    if recipients.is_empty() {
        return Err(Error::input("onion encryption needs at least one key"));
    }
    let mut inner = Vec::with_capacity(payload.len() + 1);
    inner.push(TAG_PAYLOAD);
    inner.extend_from_slice(payload);
    for (i, pk) in recipients.iter().enumerate().rev() {
        let sealed = seal(&inner, pk, rng);
        if i == 0 {
            return Ok(OnionEnvelope { bytes: sealed });
        }
        inner = Vec::with_capacity(sealed.len() + 1);
        inner.push(TAG_ENVELOPE);
        inner.extend_from_slice(&sealed);
    }
    unreachable!()
}

/// Removes one layer. `layer` is reported in the error on failure.
pub fn onion_peel(keys: &OnionKeyPair, env: &OnionEnvelope, layer: usize) -> Result<Peeled> {
    if env.bytes.len() < 32 + 16 + 1 {
        return Err(Error::Decryption { layer });
    }
    let mut eph = [0u8; 32];
    eph.copy_from_slice(&env.bytes[..32]);
    let eph = PublicKey::from(eph);
    let shared = keys.secret.diffie_hellman(&eph);
    let plain = layer_key(shared.as_bytes(), &eph, &keys.public)
        .decrypt(Nonce::from_slice(&[0u8; 12]), &env.bytes[32..])
        .map_err(|_| Error::Decryption { layer })?;
    match plain.split_first() {
        Some((&TAG_PAYLOAD, rest)) => Ok(Peeled::Payload(rest.to_vec())),
        Some((&TAG_ENVELOPE, rest)) => Ok(Peeled::Envelope(OnionEnvelope {
            bytes: rest.to_vec(),
        })),
        _ => Err(Error::Decryption { layer }),
    }
}
