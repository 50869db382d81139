//! Additively homomorphic encryption over a large plaintext group, used with
//! plaintexts in `Z_{2^l}` by reducing after decryption.
//!
//! Correctness needs the true integer sum of all accumulated plaintexts to
//! stay below the plaintext modulus. Every ciphertext therefore carries the
//! number of `l`-bit plaintexts folded into it, and additions that would exceed
//! `plaintext_modulus / 2^l` are refused.

use std::fmt;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};

use super::sharing::Ring;
use crate::error::{Error, Result};

/// Public-key side of an additively homomorphic scheme.
pub trait Ahe: Send + Sync {
    type Ciphertext: Clone + fmt::Debug + Send + Sync;
    type SecretKey: Send + Sync;

    fn ring(&self) -> Ring;

    /// Maximum number of `l`-bit plaintexts one ciphertext may accumulate.
    fn overflow_budget(&self) -> u64;

    fn encrypt<R: RngCore + ?Sized>(&self, v: u64, rng: &mut R) -> Result<Self::Ciphertext>;

    fn add(&self, a: &Self::Ciphertext, b: &Self::Ciphertext) -> Result<Self::Ciphertext>;

    fn decrypt(&self, sk: &Self::SecretKey, c: &Self::Ciphertext) -> Result<u64>;

    /// Number of plaintexts folded into `c`.
    fn additions(&self, c: &Self::Ciphertext) -> u64;

    /// Wire encoding, fixed length for a given key.
    fn encode(&self, c: &Self::Ciphertext) -> Vec<u8>;

    fn ciphertext_len(&self) -> usize;
}

fn checked_count(a: u64, b: u64, budget: u64) -> Result<u64> {
    let needed = a.saturating_add(b);
    if needed > budget {
        return Err(Error::OverflowBudget { needed, budget });
    }
    Ok(needed)
}

/// `c ⊕ Enc(v)`.
pub fn add_plain<S: Ahe, R: RngCore + ?Sized>(
    scheme: &S,
    c: &S::Ciphertext,
    v: u64,
    rng: &mut R,
) -> Result<S::Ciphertext> {
    let e = scheme.encrypt(v, rng)?;
    scheme.add(c, &e)
}

/// Splits a ciphertext into `t-1` uniform plaintext shares and one ciphertext
/// share such that together they reconstruct `Dec(c)`.
pub fn ahe_split<S: Ahe, R: RngCore + ?Sized>(
    scheme: &S,
    c: &S::Ciphertext,
    t: usize,
    rng: &mut R,
) -> Result<(Vec<u64>, S::Ciphertext)> {
    if t < 2 {
        return Err(Error::input(format!("split needs t >= 2, got {t}")));
    }
    let ring = scheme.ring();
    let plain: Vec<u64> = (0..t - 1).map(|_| ring.random(rng)).collect();
    let c = split_with(scheme, c, &plain, rng)?;
    Ok((plain, c))
}

/// [`ahe_split`] with caller-chosen plaintext shares.
pub fn split_with<S: Ahe, R: RngCore + ?Sized>(
    scheme: &S,
    c: &S::Ciphertext,
    plain: &[u64],
    rng: &mut R,
) -> Result<S::Ciphertext> {
    let ring = scheme.ring();
    let sum = plain.iter().fold(0u64, |acc, &s| ring.add(acc, s));
    add_plain(scheme, c, ring.neg(sum), rng)
}

/// Transparent stand-in: the "ciphertext" is the residue itself. Lets protocol
/// tests run without big-integer arithmetic while keeping byte accounting
/// realistic through a configurable encoded length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityAhe {
    ring: Ring,
    ciphertext_len: usize,
    budget: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityCiphertext {
    pub value: u64,
    pub additions: u64,
}

impl IdentityAhe {
    pub fn new(ring: Ring) -> Self {
        IdentityAhe {
            ring,
            ciphertext_len: 16,
            budget: u64::MAX,
        }
    }

    /// Pads encodings to `len` bytes so transcripts mimic a real scheme.
    pub fn with_ciphertext_len(mut self, len: usize) -> Self {
        self.ciphertext_len = len.max(16);
        self
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }
}

impl Ahe for IdentityAhe {
    type Ciphertext = IdentityCiphertext;
    type SecretKey = ();

    fn ring(&self) -> Ring {
        self.ring
    }

    fn overflow_budget(&self) -> u64 {
        self.budget
    }

    fn encrypt<R: RngCore + ?Sized>(&self, v: u64, _rng: &mut R) -> Result<IdentityCiphertext> {
        if !self.ring.contains(v) {
            return Err(Error::input(format!(
                "plaintext {v} exceeds {} bits",
                self.ring.bits()
            )));
        }
        Ok(IdentityCiphertext {
            value: v,
            additions: 1,
        })
    }

    fn add(&self, a: &IdentityCiphertext, b: &IdentityCiphertext) -> Result<IdentityCiphertext> {
        Ok(IdentityCiphertext {
            value: self.ring.add(a.value, b.value),
            additions: checked_count(a.additions, b.additions, self.budget)?,
        })
    }

    fn decrypt(&self, _sk: &(), c: &IdentityCiphertext) -> Result<u64> {
        Ok(c.value)
    }

    fn additions(&self, c: &IdentityCiphertext) -> u64 {
        c.additions
    }

    fn encode(&self, c: &IdentityCiphertext) -> Vec<u8> {
        let mut out = vec![0u8; self.ciphertext_len];
        out[..8].copy_from_slice(&c.additions.to_be_bytes());
        out[self.ciphertext_len - 8..].copy_from_slice(&c.value.to_be_bytes());
        out
    }

    fn ciphertext_len(&self) -> usize {
        self.ciphertext_len
    }
}

const PK_MAGIC: &[u8; 4] = b"SDPK";
const SK_MAGIC: &[u8; 4] = b"SDSK";
const KEY_VERSION: u8 = 1;

/// Paillier public key with generator `N + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaillierPublicKey {
    ring: Ring,
    n: BigUint,
    n_squared: BigUint,
    budget: u64,
    ct_len: usize,
}

#[derive(Clone, PartialEq, Eq)]
pub struct PaillierSecretKey {
    p: BigUint,
    q: BigUint,
    lambda: BigUint,
    mu: BigUint,
}

impl fmt::Debug for PaillierSecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PaillierSecretKey(..)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaillierCiphertext {
    value: BigUint,
    additions: u64,
}

/// Generates a key pair with a `modulus_bits`-bit modulus.
pub fn paillier_keygen<R: RngCore + CryptoRng + ?Sized>(
    modulus_bits: u64,
    ring: Ring,
    rng: &mut R,
) -> Result<(PaillierPublicKey, PaillierSecretKey)> {
    if modulus_bits < 128 || !modulus_bits.is_multiple_of(2) {
        return Err(Error::config(format!(
            "modulus size must be even and >= 128 bits, got {modulus_bits}"
        )));
    }
    if modulus_bits <= ring.bits() as u64 + 2 {
        return Err(Error::config("modulus too small for the plaintext ring"));
    }
    loop {
        let p = random_prime(modulus_bits / 2, rng);
        let q = random_prime(modulus_bits / 2, rng);
        if p == q {
            continue;
        }
        let n = &p * &q;
        if n.bits() != modulus_bits {
            continue;
        }
        return paillier_from_primes(p, q, ring);
    }
}

fn paillier_from_primes(
    p: BigUint,
    q: BigUint,
    ring: Ring,
) -> Result<(PaillierPublicKey, PaillierSecretKey)> {
    let n = &p * &q;
    let one = BigUint::one();
    let lambda = (&p - &one).lcm(&(&q - &one));
    let mu = mod_inverse(&(&lambda % &n), &n)
        .ok_or_else(|| Error::config("degenerate Paillier primes"))?;
    let pk = PaillierPublicKey::from_modulus(n, ring)?;
    Ok((pk, PaillierSecretKey { p, q, lambda, mu }))
}

impl PaillierPublicKey {
    fn from_modulus(n: BigUint, ring: Ring) -> Result<Self> {
        let budget_big = &n >> ring.bits() as usize;
        if budget_big.is_zero() {
            return Err(Error::config("modulus smaller than the plaintext ring"));
        }
        let budget = u64::try_from(&budget_big).unwrap_or(u64::MAX);
        let n_squared = &n * &n;
        let ct_len = (n_squared.bits() as usize).div_ceil(8);
        Ok(PaillierPublicKey {
            ring,
            n,
            n_squared,
            budget,
            ct_len,
        })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    /// `magic | version | ring bits | u32 length | N big-endian`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(PK_MAGIC);
        out.push(KEY_VERSION);
        out.push(self.ring.bits() as u8);
        push_big(&mut out, &self.n);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = KeyReader::new(bytes, PK_MAGIC)?;
        let ring = Ring::new(cur.byte()? as u32)?;
        let n = cur.big()?;
        cur.finish()?;
        Self::from_modulus(n, ring)
    }

    pub fn decode_ciphertext(&self, bytes: &[u8]) -> Result<PaillierCiphertext> {
        if bytes.len() != 8 + 4 + self.ct_len {
            return Err(Error::input("ciphertext has the wrong length"));
        }
        let additions = u64::from_be_bytes(bytes[..8].try_into().unwrap());
        let len = u32::from_be_bytes(bytes[8..12].try_into().unwrap()) as usize;
        if len != self.ct_len {
            return Err(Error::input("ciphertext length prefix mismatch"));
        }
        let value = BigUint::from_bytes_be(&bytes[12..]);
        if value >= self.n_squared {
            return Err(Error::input("ciphertext out of range"));
        }
        Ok(PaillierCiphertext { value, additions })
    }
}

impl PaillierSecretKey {
    /// `magic | version | ring bits | p | q`, each integer length-prefixed.
    pub fn to_bytes(&self, ring: Ring) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SK_MAGIC);
        out.push(KEY_VERSION);
        out.push(ring.bits() as u8);
        push_big(&mut out, &self.p);
        push_big(&mut out, &self.q);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(PaillierPublicKey, PaillierSecretKey)> {
        let mut cur = KeyReader::new(bytes, SK_MAGIC)?;
        let ring = Ring::new(cur.byte()? as u32)?;
        let p = cur.big()?;
        let q = cur.big()?;
        cur.finish()?;
        paillier_from_primes(p, q, ring)
    }
}

impl Ahe for PaillierPublicKey {
    type Ciphertext = PaillierCiphertext;
    type SecretKey = PaillierSecretKey;

    fn ring(&self) -> Ring {
        self.ring
    }

    fn overflow_budget(&self) -> u64 {
        self.budget
    }

    fn encrypt<R: RngCore + ?Sized>(&self, v: u64, rng: &mut R) -> Result<PaillierCiphertext> {
        if !self.ring.contains(v) {
            return Err(Error::input(format!(
                "plaintext {v} exceeds {} bits",
                self.ring.bits()
            )));
        }
        let one = BigUint::one();
        let r = loop {
            let r = rng.gen_biguint_below(&self.n);
            if !r.is_zero() && r.gcd(&self.n) == one {
                break r;
            }
        };
        // (1 + vN) r^N mod N^2
        let gm = (&one + BigUint::from(v) * &self.n) % &self.n_squared;
        let value = gm * r.modpow(&self.n, &self.n_squared) % &self.n_squared;
        Ok(PaillierCiphertext {
            value,
            additions: 1,
        })
    }

    fn add(&self, a: &PaillierCiphertext, b: &PaillierCiphertext) -> Result<PaillierCiphertext> {
        Ok(PaillierCiphertext {
            value: &a.value * &b.value % &self.n_squared,
            additions: checked_count(a.additions, b.additions, self.budget)?,
        })
    }

    fn decrypt(&self, sk: &PaillierSecretKey, c: &PaillierCiphertext) -> Result<u64> {
        let u = c.value.modpow(&sk.lambda, &self.n_squared);
        let l = (u - BigUint::one()) / &self.n;
        let m = l * &sk.mu % &self.n;
        let low = m.iter_u64_digits().next().unwrap_or(0);
        Ok(self.ring.reduce(low))
    }

    fn additions(&self, c: &PaillierCiphertext) -> u64 {
        c.additions
    }

    /// `u64 addition count | u32 length | value big-endian, zero-padded`.
    fn encode(&self, c: &PaillierCiphertext) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.ct_len);
        out.extend_from_slice(&c.additions.to_be_bytes());
        out.extend_from_slice(&(self.ct_len as u32).to_be_bytes());
        let raw = c.value.to_bytes_be();
        out.resize(12 + self.ct_len - raw.len(), 0);
        out.extend_from_slice(&raw);
        out
    }

    fn ciphertext_len(&self) -> usize {
        12 + self.ct_len
    }
}

fn push_big(out: &mut Vec<u8>, v: &BigUint) {
    let raw = v.to_bytes_be();
    out.extend_from_slice(&(raw.len() as u32).to_be_bytes());
    out.extend_from_slice(&raw);
}

struct KeyReader<'a> {
    rest: &'a [u8],
}

impl<'a> KeyReader<'a> {
    fn new(bytes: &'a [u8], magic: &[u8; 4]) -> Result<Self> {
        if bytes.len() < 5 || &bytes[..4] != magic {
            return Err(Error::input("not a key encoding"));
        }
        if bytes[4] != KEY_VERSION {
            return Err(Error::input(format!(
                "unsupported key version {}",
                bytes[4]
            )));
        }
        Ok(KeyReader { rest: &bytes[5..] })
    }

    fn byte(&mut self) -> Result<u8> {
        let (&b, rest) = self
            .rest
            .split_first()
            .ok_or_else(|| Error::input("truncated key"))?;
        self.rest = rest;
        Ok(b)
    }

    fn big(&mut self) -> Result<BigUint> {
        if self.rest.len() < 4 {
            return Err(Error::input("truncated key"));
        }
        let len = u32::from_be_bytes(self.rest[..4].try_into().unwrap()) as usize;
        if self.rest.len() < 4 + len {
            return Err(Error::input("truncated key"));
        }
        let v = BigUint::from_bytes_be(&self.rest[4..4 + len]);
        self.rest = &self.rest[4 + len..];
        Ok(v)
    }

    fn finish(self) -> Result<()> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(Error::input("trailing bytes after key"))
        }
    }
}

fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    use num_bigint::BigInt;
    let (a, m) = (BigInt::from(a.clone()), BigInt::from(m.clone()));
    let e = a.extended_gcd(&m);
    if !e.gcd.is_one() {
        return None;
    }
    e.x.mod_floor(&m).to_biguint()
}

const SMALL_PRIMES: [u32; 24] = [
    3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

fn random_prime<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    loop {
        let mut c = rng.gen_biguint(bits);
        c.set_bit(bits - 1, true);
        c.set_bit(bits - 2, true);
        c.set_bit(0, true);
        if SMALL_PRIMES.iter().any(|&p| (&c % p).is_zero()) {
            continue;
        }
        if is_probable_prime(&c, 40, rng) {
            return c;
        }
    }
}

/// Miller-Rabin with random bases.
fn is_probable_prime<R: RngCore + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    let one = BigUint::one();
    let two = &one + &one;
    if *n < two {
        return false;
    }
    if *n == two || *n == BigUint::from(3u8) {
        return true;
    }
    if n.is_even() {
        return false;
    }
    let n1 = n - &one;
    let s = n1.trailing_zeros().unwrap_or(0);
    let d = &n1 >> s as usize;
    'outer: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n1);
        let mut x = a.modpow(&d, n);
        if x == one || x == n1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn keys(bits: u32) -> (PaillierPublicKey, PaillierSecretKey, ChaCha20Rng) {
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let (pk, sk) = paillier_keygen(512, Ring::new(bits).unwrap(), &mut rng).unwrap();
        (pk, sk, rng)
    }

    #[test]
    fn primality() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for (n, prime) in [
            (2u64, true),
            (97, true),
            (561, false),
            (7919, true),
            (1_000_000_007, true),
            (1_000_000_008, false),
        ] {
            assert_eq!(
                is_probable_prime(&BigUint::from(n), 20, &mut rng),
                prime,
                "{n}"
            );
        }
        // Carmichael number 41041 = 7*11*13*41
        assert!(!is_probable_prime(&BigUint::from(41041u32), 20, &mut rng));
    }

    #[test]
    fn paillier_identities() {
        let (pk, sk, mut rng) = keys(64);
        assert_eq!(pk.modulus().bits(), 512);
        let z = pk
            .add(
                &pk.encrypt(0, &mut rng).unwrap(),
                &pk.encrypt(0, &mut rng).unwrap(),
            )
            .unwrap();
        assert_eq!(pk.decrypt(&sk, &z).unwrap(), 0);
        let w = pk
            .add(
                &pk.encrypt(u64::MAX, &mut rng).unwrap(),
                &pk.encrypt(1, &mut rng).unwrap(),
            )
            .unwrap();
        assert_eq!(pk.decrypt(&sk, &w).unwrap(), 0);
        for _ in 0..20 {
            let v: u64 = rng.gen();
            assert_eq!(
                pk.decrypt(&sk, &pk.encrypt(v, &mut rng).unwrap()).unwrap(),
                v
            );
        }
    }

    #[test]
    fn paillier_sums_match_plaintext() {
        let (pk, sk, mut rng) = keys(32);
        let ring = pk.ring();
        for _ in 0..50 {
            let vals: Vec<u64> = (0..7).map(|_| ring.random(&mut rng)).collect();
            let mut acc = pk.encrypt(vals[0], &mut rng).unwrap();
            for &v in &vals[1..] {
                acc = pk.add(&acc, &pk.encrypt(v, &mut rng).unwrap()).unwrap();
            }
            let want = vals.iter().fold(0, |a, &v| ring.add(a, v));
            assert_eq!(pk.decrypt(&sk, &acc).unwrap(), want);
            assert_eq!(pk.additions(&acc), 7);
        }
    }

    #[test]
    fn overflow_budget_is_enforced() {
        let ahe = IdentityAhe::new(Ring::default()).with_budget(3);
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let c = ahe.encrypt(1, &mut rng).unwrap();
        let c2 = ahe.add(&c, &c).unwrap();
        let c3 = ahe.add(&c2, &c).unwrap();
        assert!(matches!(
            ahe.add(&c3, &c),
            Err(Error::OverflowBudget {
                needed: 4,
                budget: 3
            })
        ));
        let (pk, _, _) = keys(64);
        assert_eq!(
            pk.overflow_budget(),
            u64::MAX,
            "512-bit modulus leaves a huge budget"
        );
    }

    #[test]
    fn split_reconstructs() {
        let (pk, sk, mut rng) = keys(64);
        let ring = pk.ring();
        for t in 2..=4 {
            for _ in 0..5 {
                let v: u64 = rng.gen();
                let c = pk.encrypt(v, &mut rng).unwrap();
                let (plain, cs) = ahe_split(&pk, &c, t, &mut rng).unwrap();
                assert_eq!(plain.len(), t - 1);
                let total = plain
                    .iter()
                    .fold(pk.decrypt(&sk, &cs).unwrap(), |a, &s| ring.add(a, s));
                assert_eq!(total, v);
            }
        }
        let c = pk.encrypt(42, &mut rng).unwrap();
        let forced = split_with(&pk, &c, &[0], &mut rng).unwrap();
        assert_eq!(pk.decrypt(&sk, &forced).unwrap(), 42);
        assert!(ahe_split(&pk, &c, 1, &mut rng).is_err());
    }

    #[test]
    fn key_and_ciphertext_encodings_round_trip() {
        let (pk, sk, mut rng) = keys(64);
        let pk2 = PaillierPublicKey::from_bytes(&pk.to_bytes()).unwrap();
        assert_eq!(pk, pk2);
        let (pk3, sk3) = PaillierSecretKey::from_bytes(&sk.to_bytes(pk.ring())).unwrap();
        assert_eq!(pk3, pk);
        let c = pk.encrypt(123, &mut rng).unwrap();
        let enc = pk.encode(&c);
        assert_eq!(enc.len(), pk.ciphertext_len());
        let back = pk.decode_ciphertext(&enc).unwrap();
        assert_eq!(back, c);
        assert_eq!(pk3.decrypt(&sk3, &back).unwrap(), 123);
        assert!(PaillierPublicKey::from_bytes(b"SDPK\x02").is_err());
    }
}
