//! Sequential shuffle: each shuffler peels one onion layer, mixes in its share
//! of fake reports and permutes before forwarding.

use rand::seq::SliceRandom;
use rand::{CryptoRng, RngCore};

use super::transcript::{MessageKind, Network, PartyId};
use crate::crypto::{
    onion_encrypt, onion_peel, OnionEnvelope, OnionKeyPair, OnionPublicKey, Peeled,
};
use crate::error::{Error, Result};

/// Fakes inserted by each of `r` shufflers: `n_r / r` each, with the first
/// `n_r mod r` inserting one extra.
pub fn fakes_per_shuffler(n_r: usize, r: usize) -> Vec<usize> {
    (0..r).map(|i| n_r / r + usize::from(i < n_r % r)).collect()
}

/// Public keys in peeling order for a user report: every shuffler, then the
/// server.
pub fn layer_keys(shufflers: &[OnionKeyPair], server: &OnionKeyPair) -> Vec<OnionPublicKey> {
    shufflers
        .iter()
        .map(|k| k.public())
        .chain(std::iter::once(server.public()))
        .collect()
}

/// Runs the chain and returns the payloads the server recovers.
///
/// `fake` produces one uniformly random report payload.
pub fn sequential_shuffle<R, F>(
    envelopes: Vec<OnionEnvelope>,
    shufflers: &[OnionKeyPair],
    server: &OnionKeyPair,
    n_r: usize,
    mut fake: F,
    rng: &mut R,
    net: &mut Network,
) -> Result<Vec<Vec<u8>>>
where
    R: RngCore + CryptoRng,
    F: FnMut(&mut R) -> Vec<u8>,
{
    let keys = layer_keys(shufflers, server);
    let batch = mix(
        envelopes,
        shufflers.len(),
        n_r,
        |i, env| match onion_peel(&shufflers[i], env, i)? {
            Peeled::Envelope(e) => Ok(e),
            Peeled::Payload(_) => Err(Error::Decryption { layer: i }),
        },
        |i, rng| {
            let payload = fake(rng);
            onion_encrypt(&payload, &keys[i + 1..], rng)
        },
        |e| e.bytes.clone(),
        rng,
        net,
    )?;
    let r = shufflers.len();
    batch
        .iter()
        .map(|env| match onion_peel(server, env, r)? {
            Peeled::Payload(p) => Ok(p),
            Peeled::Envelope(_) => Err(Error::Decryption { layer: r }),
        })
        .collect()
}

/// [`sequential_shuffle`] with transparent envelopes: the same mixing,
/// fake insertion and message flow, without the layer encryption. A test
/// double for statistics that need many trials.
pub fn sequential_shuffle_plain<R, F>(
    payloads: Vec<Vec<u8>>,
    r: usize,
    n_r: usize,
    mut fake: F,
    rng: &mut R,
    net: &mut Network,
) -> Result<Vec<Vec<u8>>>
where
    R: RngCore + CryptoRng,
    F: FnMut(&mut R) -> Vec<u8>,
{
    mix(
        payloads,
        r,
        n_r,
        |_, p| Ok(p.clone()),
        |_, rng| Ok(fake(rng)),
        |p| p.clone(),
        rng,
        net,
    )
}

/// Shuffler `i` transforms each incoming item with `peel`, appends its quota
/// of fakes from `fake`, permutes and forwards.
#[allow(clippy::too_many_arguments)]
fn mix<E, R>(
    items: Vec<E>,
    r: usize,
    n_r: usize,
    mut peel: impl FnMut(usize, &E) -> Result<E>,
    mut fake: impl FnMut(usize, &mut R) -> Result<E>,
    wire: impl Fn(&E) -> Vec<u8>,
    rng: &mut R,
    net: &mut Network,
) -> Result<Vec<E>>
where
    R: RngCore + CryptoRng,
{
    if r == 0 {
        return Err(Error::config(
            "sequential shuffle needs at least one shuffler",
        ));
    }
    let quota = fakes_per_shuffler(n_r, r);
    let mut batch = items;
    for (i, &extra) in quota.iter().enumerate() {
        let mut next = Vec::with_capacity(batch.len() + extra);
        for item in &batch {
            next.push(peel(i, item)?);
        }
        for _ in 0..extra {
            next.push(fake(i, rng)?);
        }
        next.shuffle(rng);
        net.next_round();
        let to = if i + 1 < r {
            PartyId::Shuffler(i + 1)
        } else {
            PartyId::Server
        };
        for e in &next {
            net.send(PartyId::Shuffler(i), to, MessageKind::Onion, || wire(e));
        }
        batch = next;
    }
    Ok(batch)
}
