//! Shuffling constructions: the resharing oblivious shuffle, its encrypted
//! variant, and the onion-routed sequential shuffle.

mod engine;
mod sequential;
mod transcript;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use engine::{deliver, permutation_from_seed, run, Column, RoundLog, ShuffleState, Tapes};
pub use sequential::{
    fakes_per_shuffler, layer_keys, sequential_shuffle, sequential_shuffle_plain,
};
pub use transcript::{read_jsonl, write_jsonl, MessageKind, Network, PartyId, TranscriptRecord};

use crate::crypto::{Ahe, IdentityAhe, IdentityCiphertext, Ring};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShuffleConfig {
    pub r: usize,
    /// Hider count `floor(r/2) + 1`.
    pub t: usize,
    /// `C(r, t)`.
    pub rounds: usize,
    pub ring: Ring,
}

impl ShuffleConfig {
    pub fn new(r: usize, ring: Ring) -> Result<Self> {
        if r < 2 {
            return Err(Error::config(format!("need at least 2 shufflers, got {r}")));
        }
        if r > 25 {
            return Err(Error::config(format!(
                "{r} shufflers would need too many rounds"
            )));
        }
        let t = r / 2 + 1;
        Ok(ShuffleConfig {
            r,
            t,
            rounds: binomial(r, t),
            ring,
        })
    }

    pub fn schedule(&self) -> PartitionSchedule {
        PartitionSchedule::new(self.r, self.t)
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// All `(hiders, seekers)` splits of the shufflers, hider sets in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSchedule {
    pairs: Vec<(Vec<usize>, Vec<usize>)>,
}

impl PartitionSchedule {
    pub fn new(r: usize, t: usize) -> Self {
        let mut pairs = Vec::new();
        let mut combo: Vec<usize> = (0..t).collect();
        loop {
            let seekers = (0..r).filter(|i| !combo.contains(i)).collect();
            pairs.push((combo.clone(), seekers));
            // advance to the next combination
            let mut i = t;
            loop {
                if i == 0 {
                    return PartitionSchedule { pairs };
                }
                i -= 1;
                if combo[i] < r - t + i {
                    combo[i] += 1;
                    for j in i + 1..t {
                        combo[j] = combo[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    pub fn pairs(&self) -> &[(Vec<usize>, Vec<usize>)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Result of a standalone shuffle.
#[derive(Debug, Clone)]
pub struct Shuffled<C> {
    pub state: ShuffleState<C>,
    pub rounds: Vec<RoundLog>,
}

/// Oblivious shuffle of plaintext share columns, one per shuffler.
pub fn oblivious_shuffle<R: Rng + ?Sized>(
    columns: Vec<Vec<u64>>,
    cfg: &ShuffleConfig,
    rng: &mut R,
    net: &mut Network,
) -> Result<PlainShuffled> {
    let state: ShuffleState<IdentityCiphertext> = ShuffleState {
        columns: columns.into_iter().map(Column::Plain).collect(),
    };
    let mut tapes = Tapes::derive(cfg.r, rng);
    let (out, rounds) = run(state, cfg, &IdentityAhe::new(cfg.ring), &mut tapes, net)?;
    let columns = out
        .columns
        .into_iter()
        .map(|c| match c {
            Column::Plain(v) => Ok(v),
            Column::Cipher(_) => Err(Error::abort("shuffle", "unexpected ciphertext column")),
        })
        .collect::<Result<_>>()?;
    Ok(PlainShuffled { columns, rounds })
}

#[derive(Debug, Clone)]
pub struct PlainShuffled {
    pub columns: Vec<Vec<u64>>,
    pub rounds: Vec<RoundLog>,
}

/// Encrypted oblivious shuffle: exactly one column is ciphertext throughout.
pub fn eos<S: Ahe, R: Rng + ?Sized>(
    state: ShuffleState<S::Ciphertext>,
    cfg: &ShuffleConfig,
    scheme: &S,
    rng: &mut R,
    net: &mut Network,
) -> Result<Shuffled<S::Ciphertext>> {
    if state.cipher_count() != 1 {
        return Err(Error::abort(
            "eos",
            format!(
                "expected exactly one ciphertext column, found {}",
                state.cipher_count()
            ),
        ));
    }
    if scheme.ring() != cfg.ring {
        return Err(Error::config(
            "scheme and shuffle disagree on the ring width",
        ));
    }
    let mut tapes = Tapes::derive(cfg.r, rng);
    let (state, rounds) = run(state, cfg, scheme, &mut tapes, net)?;
    Ok(Shuffled { state, rounds })
}

/// Column-wise sum of plaintext columns.
pub fn reconstruct_columns(columns: &[Vec<u64>], ring: Ring) -> Result<Vec<u64>> {
    let n = columns.first().map_or(0, Vec::len);
    let mut out = vec![0u64; n];
    for v in columns {
        if v.len() != n {
            return Err(Error::input("columns differ in length"));
        }
        for (o, &x) in out.iter_mut().zip(v) {
            *o = ring.add(*o, x);
        }
    }
    Ok(out)
}

/// Shares each secret among `r` parties, returning one column per party.
pub fn share_columns<R: Rng + ?Sized>(
    secrets: &[u64],
    r: usize,
    ring: Ring,
    rng: &mut R,
) -> Result<Vec<Vec<u64>>> {
    let mut cols = vec![Vec::with_capacity(secrets.len()); r];
    for &s in secrets {
        let sv = crate::crypto::share(s, r, ring, rng)?;
        for (c, x) in cols.iter_mut().zip(sv.shares) {
            c.push(x);
        }
    }
    Ok(cols)
}

/// Composition of the per-round permutations: output `i` of the whole shuffle
/// is input `composed[i]`.
pub fn composed_permutation(rounds: &[RoundLog], n: usize) -> Vec<usize> {
    let mut pos: Vec<usize> = (0..n).collect();
    for log in rounds {
        let perm = permutation_from_seed(log.permutation_seed, n);
        pos = perm.iter().map(|&i| pos[i]).collect();
    }
    pos
}
