//! Secret sharing, additively homomorphic encryption, and onion encryption.

mod ahe;
mod onion;
mod sharing;

pub use ahe::{
    add_plain, ahe_split, paillier_keygen, split_with, Ahe, IdentityAhe, IdentityCiphertext,
    PaillierCiphertext, PaillierPublicKey, PaillierSecretKey,
};
pub use onion::{onion_encrypt, onion_peel, OnionEnvelope, OnionKeyPair, Peeled};
pub use sharing::{reconstruct, reconstruct_parts, share, Ring, ShareVector};
pub use x25519_dalek::PublicKey as OnionPublicKey;
