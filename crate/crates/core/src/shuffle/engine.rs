//! Resharing-based oblivious shuffle, optionally with one share column kept
//! under additively homomorphic encryption.
//!
//! Each round a majority of shufflers (the hiders) collects every share,
//! applies a permutation only they know and reshares to everybody. Because
//! the schedule visits every hider set, any minority coalition is a seeker
//! set in some round and cannot know the composed permutation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::transcript::{MessageKind, Network, PartyId};
use super::ShuffleConfig;
use crate::crypto::{add_plain, Ahe, Ring};
use crate::error::{Error, Result};

/// One shuffler's share vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Column<C> {
    Plain(Vec<u64>),
    Cipher(Vec<C>),
}

impl<C> Column<C> {
    pub fn len(&self) -> usize {
        match self {
            Column::Plain(v) => v.len(),
            Column::Cipher(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_cipher(&self) -> bool {
        matches!(self, Column::Cipher(_))
    }

    fn permute(&mut self, perm: &[usize])
    where
        C: Clone,
    {
        match self {
            Column::Plain(v) => *v = perm.iter().map(|&i| v[i]).collect(),
            Column::Cipher(v) => *v = perm.iter().map(|&i| v[i].clone()).collect(),
        }
    }
}

/// Share columns indexed by the shuffler that holds them.
#[derive(Debug, Clone, PartialEq)]
pub struct ShuffleState<C> {
    pub columns: Vec<Column<C>>,
}

impl<C> ShuffleState<C> {
    pub fn cipher_holder(&self) -> Option<usize> {
        self.columns.iter().position(Column::is_cipher)
    }

    pub fn cipher_count(&self) -> usize {
        self.columns.iter().filter(|c| c.is_cipher()).count()
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// What happened in one round, for audits and hiding tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundLog {
    pub hiders: Vec<usize>,
    pub seekers: Vec<usize>,
    pub permutation_seed: [u8; 32],
}

/// The permutation a seed denotes: output position `i` takes input `perm[i]`.
pub fn permutation_from_seed(seed: [u8; 32], n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha20Rng::from_seed(seed));
    perm
}

/// Random tapes of the shufflers plus the stream used for encryption
/// randomness. Keeping encryption randomness separate makes the plaintext
/// and encrypted shuffles consume party tapes identically. Each shuffler picks
/// the recipients of its remainders from its own routing tape, so the message
/// pattern does not depend on the number of reports.
pub struct Tapes {
    pub shufflers: Vec<ChaCha20Rng>,
    pub routing: Vec<ChaCha20Rng>,
    pub encryption: ChaCha20Rng,
}

impl Tapes {
    /// Derives all tapes from one stream.
    pub fn derive<R: Rng + ?Sized>(r: usize, rng: &mut R) -> Self {
        let shufflers = (0..r).map(|_| ChaCha20Rng::from_seed(rng.gen())).collect();
        let encryption = ChaCha20Rng::from_seed(rng.gen());
        let routing = (0..r).map(|_| ChaCha20Rng::from_seed(rng.gen())).collect();
        Tapes {
            shufflers,
            routing,
            encryption,
        }
    }
}

fn encode_plain(ring: Ring, v: &[u64]) -> Vec<u8> {
    let w = ring.byte_len();
    let mut out = Vec::with_capacity(v.len() * w);
    for x in v {
        out.extend_from_slice(&x.to_le_bytes()[..w]);
    }
    out
}

fn encode_column<S: Ahe>(scheme: &S, col: &Column<S::Ciphertext>) -> Vec<u8> {
    match col {
        Column::Plain(v) => encode_plain(scheme.ring(), v),
        Column::Cipher(v) => v.iter().flat_map(|c| scheme.encode(c)).collect(),
    }
}

/// Splits a column into `k` parts. The first `k-1` are uniform plaintexts; the
/// returned remainder (plaintext or ciphertext) completes the sum.
/// Random plaintext parts plus the remainder column.
type SplitColumn<C> = (Vec<Vec<u64>>, Column<C>);

fn split_column<S: Ahe>(
    scheme: &S,
    col: Column<S::Ciphertext>,
    k: usize,
    tape: &mut ChaCha20Rng,
    enc: &mut ChaCha20Rng,
) -> Result<SplitColumn<S::Ciphertext>> {
    let ring = scheme.ring();
    let n = col.len();
    let mut parts = vec![Vec::with_capacity(n); k - 1];
    let mut sums = Vec::with_capacity(n);
    for _ in 0..n {
        let mut acc = 0u64;
        for p in parts.iter_mut() {
            let s = ring.random(tape);
            acc = ring.add(acc, s);
            p.push(s);
        }
        sums.push(acc);
    }
    let rest = match col {
        Column::Plain(v) => {
            Column::Plain(v.iter().zip(&sums).map(|(&x, &s)| ring.sub(x, s)).collect())
        }
        Column::Cipher(v) => Column::Cipher(
            v.iter()
                .zip(&sums)
                .map(|(c, &s)| add_plain(scheme, c, ring.neg(s), enc))
                .collect::<Result<_>>()?,
        ),
    };
    Ok((parts, rest))
}

fn add_into<S: Ahe>(
    scheme: &S,
    acc: Column<S::Ciphertext>,
    other: Column<S::Ciphertext>,
    enc: &mut ChaCha20Rng,
) -> Result<Column<S::Ciphertext>> {
    let ring = scheme.ring();
    if acc.len() != other.len() {
        return Err(Error::abort("shuffle", "share vectors differ in length"));
    }
    Ok(match (acc, other) {
        (Column::Plain(a), Column::Plain(b)) => {
            Column::Plain(a.iter().zip(&b).map(|(&x, &y)| ring.add(x, y)).collect())
        }
        (Column::Cipher(c), Column::Plain(p)) | (Column::Plain(p), Column::Cipher(c)) => {
            Column::Cipher(
                c.iter()
                    .zip(&p)
                    .map(|(c, &v)| add_plain(scheme, c, v, enc))
                    .collect::<Result<_>>()?,
            )
        }
        (Column::Cipher(_), Column::Cipher(_)) => {
            return Err(Error::abort("shuffle", "two ciphertext columns met"));
        }
    })
}

/// Runs all `C(r,t)` rounds. `scheme` is only exercised if a ciphertext
/// column is present.
pub fn run<S: Ahe>(
    mut state: ShuffleState<S::Ciphertext>,
    cfg: &ShuffleConfig,
    scheme: &S,
    tapes: &mut Tapes,
    net: &mut Network,
) -> Result<(ShuffleState<S::Ciphertext>, Vec<RoundLog>)> {
    let r = cfg.r;
    if state.columns.len() != r || tapes.shufflers.len() != r || tapes.routing.len() != r {
        return Err(Error::abort(
            "shuffle",
            format!("expected {r} share columns and tapes"),
        ));
    }
    let n = state.len();
    if state.columns.iter().any(|c| c.len() != n) {
        return Err(Error::abort("shuffle", "share vectors differ in length"));
    }
    if state.cipher_count() > 1 {
        return Err(Error::abort("shuffle", "more than one ciphertext column"));
    }
    let ring = scheme.ring();
    let t = cfg.t;
    let mut logs = Vec::with_capacity(cfg.rounds);

    for (hiders, seekers) in cfg.schedule().pairs() {
        net.next_round();
        let mut taken: Vec<Option<Column<S::Ciphertext>>> =
            state.columns.drain(..).map(Some).collect();

        // seekers hand everything to the hiders
        let mut inbox: Vec<Vec<Column<S::Ciphertext>>> = vec![Vec::new(); r];
        for &s in seekers {
            let col = taken[s].take().expect("column present");
            let target = tapes.routing[s].gen_range(0..t);
            let kind = if col.is_cipher() {
                MessageKind::SeekerCiphertext
            } else {
                MessageKind::SeekerShare
            };
            let (parts, rest) = split_column(
                scheme,
                col,
                t,
                &mut tapes.shufflers[s],
                &mut tapes.encryption,
            )?;
            let mut parts = parts.into_iter();
            let mut rest = Some(rest);
            for (slot, &h) in hiders.iter().enumerate() {
                if slot == target {
                    let rest = rest.take().expect("remainder used once");
                    net.send(PartyId::Shuffler(s), PartyId::Shuffler(h), kind, || {
                        encode_column(scheme, &rest)
                    });
                    inbox[h].push(rest);
                } else {
                    let p = parts.next().expect("t-1 random parts");
                    net.send(
                        PartyId::Shuffler(s),
                        PartyId::Shuffler(h),
                        MessageKind::SeekerShare,
                        || encode_plain(ring, &p),
                    );
                    inbox[h].push(Column::Plain(p));
                }
            }
        }

        // hiders accumulate
        let mut held: Vec<Column<S::Ciphertext>> = Vec::with_capacity(t);
        for &h in hiders {
            let mut acc = taken[h].take().expect("column present");
            for part in inbox[h].drain(..) {
                acc = add_into(scheme, acc, part, &mut tapes.encryption)?;
            }
            held.push(acc);
        }

        // the first hider picks the permutation seed and shares it
        let leader = hiders[0];
        let seed: [u8; 32] = tapes.shufflers[leader].gen();
        for &h in &hiders[1..] {
            net.send(
                PartyId::Shuffler(leader),
                PartyId::Shuffler(h),
                MessageKind::PermutationSeed,
                || seed.to_vec(),
            );
        }
        let perm = permutation_from_seed(seed, n);
        for col in held.iter_mut() {
            col.permute(&perm);
        }

        // hiders reshare to everyone
        let mut next: Vec<Option<Column<S::Ciphertext>>> = vec![None; r];
        for (col, &h) in held.into_iter().zip(hiders.iter()) {
            let target = tapes.routing[h].gen_range(0..r);
            let kind = if col.is_cipher() {
                MessageKind::ReshareCiphertext
            } else {
                MessageKind::Reshare
            };
            let (parts, rest) = split_column(
                scheme,
                col,
                r,
                &mut tapes.shufflers[h],
                &mut tapes.encryption,
            )?;
            let mut parts = parts.into_iter();
            let mut rest = Some(rest);
            for (j, slot) in next.iter_mut().enumerate() {
                let piece = if j == target {
                    let rest = rest.take().expect("remainder used once");
                    net.send(PartyId::Shuffler(h), PartyId::Shuffler(j), kind, || {
                        encode_column(scheme, &rest)
                    });
                    rest
                } else {
                    let p = parts.next().expect("r-1 random parts");
                    net.send(
                        PartyId::Shuffler(h),
                        PartyId::Shuffler(j),
                        MessageKind::Reshare,
                        || encode_plain(ring, &p),
                    );
                    Column::Plain(p)
                };
                *slot = Some(match slot.take() {
                    None => piece,
                    Some(acc) => add_into(scheme, acc, piece, &mut tapes.encryption)?,
                });
            }
        }
        state.columns = next
            .into_iter()
            .map(|c| c.expect("every shuffler receives"))
            .collect();
        logs.push(RoundLog {
            hiders: hiders.clone(),
            seekers: seekers.clone(),
            permutation_seed: seed,
        });
    }
    Ok((state, logs))
}

/// Columns sent to the server, which decrypts and reconstructs.
pub fn deliver<S: Ahe>(
    state: &ShuffleState<S::Ciphertext>,
    scheme: &S,
    sk: Option<&S::SecretKey>,
    net: &mut Network,
) -> Result<Vec<u64>> {
    let ring = scheme.ring();
    net.next_round();
    let mut out = vec![0u64; state.len()];
    for (j, col) in state.columns.iter().enumerate() {
        match col {
            Column::Plain(v) => {
                net.send(
                    PartyId::Shuffler(j),
                    PartyId::Server,
                    MessageKind::ToServer,
                    || encode_plain(ring, v),
                );
                for (o, &x) in out.iter_mut().zip(v) {
                    *o = ring.add(*o, x);
                }
            }
            Column::Cipher(v) => {
                net.send(
                    PartyId::Shuffler(j),
                    PartyId::Server,
                    MessageKind::ToServerCiphertext,
                    || encode_column(scheme, col),
                );
                let sk = sk.ok_or_else(|| {
                    Error::abort("reconstruct", "ciphertext column but no secret key")
                })?;
                for (o, c) in out.iter_mut().zip(v) {
                    *o = ring.add(*o, scheme.decrypt(sk, c)?);
                }
            }
        }
    }
    Ok(out)
}
