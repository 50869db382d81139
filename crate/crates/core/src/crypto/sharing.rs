use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The residue ring `Z_{2^bits}` with `1 <= bits <= 64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ring {
    bits: u32,
}

impl Default for Ring {
    fn default() -> Self {
        Ring { bits: 64 }
    }
}

impl Ring {
    pub fn new(bits: u32) -> Result<Self> {
        if !(1..=64).contains(&bits) {
            return Err(Error::config(format!(
                "ring width must be in 1..=64 bits, got {bits}"
            )));
        }
        Ok(Ring { bits })
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn mask(self) -> u64 {
        if self.bits == 64 {
            u64::MAX
        } else {
            (1u64 << self.bits) - 1
        }
    }

    /// Number of residues, `2^bits`.
    pub fn size(self) -> u128 {
        1u128 << self.bits
    }

    pub fn contains(self, v: u64) -> bool {
        v & !self.mask() == 0
    }

    pub fn reduce(self, v: u64) -> u64 {
        v & self.mask()
    }

    pub fn add(self, a: u64, b: u64) -> u64 {
        a.wrapping_add(b) & self.mask()
    }

    pub fn sub(self, a: u64, b: u64) -> u64 {
        a.wrapping_sub(b) & self.mask()
    }

    pub fn neg(self, a: u64) -> u64 {
        a.wrapping_neg() & self.mask()
    }

    pub fn random<R: Rng + ?Sized>(self, rng: &mut R) -> u64 {
        rng.gen::<u64>() & self.mask()
    }

    /// Bytes needed to carry one residue on the wire.
    pub fn byte_len(self) -> usize {
        self.bits.div_ceil(8) as usize
    }
}

/// Additive shares of one secret.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareVector {
    pub ring: Ring,
    pub shares: Vec<u64>,
}

/// Splits `v` into `r` additive shares: `r-1` uniform, the last fixing the sum.
pub fn share<R: Rng + ?Sized>(v: u64, r: usize, ring: Ring, rng: &mut R) -> Result<ShareVector> {
    if r < 2 {
        return Err(Error::input(format!(
            "sharing needs at least 2 parties, got {r}"
        )));
    }
    if !ring.contains(v) {
        return Err(Error::input(format!(
            "value {v} does not fit in {} bits",
            ring.bits()
        )));
    }
    let mut shares = Vec::with_capacity(r);
    let mut acc = 0u64;
    for _ in 0..r - 1 {
        let s = ring.random(rng);
        acc = ring.add(acc, s);
        shares.push(s);
    }
    shares.push(ring.sub(v, acc));
    Ok(ShareVector { ring, shares })
}

/// Sum of the shares in the ring.
pub fn reconstruct(shares: &ShareVector) -> Result<u64> {
    if shares.shares.is_empty() {
        return Err(Error::input("no shares to reconstruct"));
    }
    Ok(shares
        .shares
        .iter()
        .fold(0, |acc, &s| shares.ring.add(acc, s)))
}

/// Reconstructs from share vectors held by different parties. All must agree
/// on the ring width.
pub fn reconstruct_parts(parts: &[ShareVector]) -> Result<u64> {
    let first = parts
        .first()
        .ok_or_else(|| Error::input("no shares to reconstruct"))?;
    let mut acc = 0u64;
    for p in parts {
        if p.ring != first.ring {
            return Err(Error::input(format!(
                "share widths differ: {} vs {} bits",
                first.ring.bits(),
                p.ring.bits()
            )));
        }
        acc = first.ring.add(acc, reconstruct(p)?);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn byte_ring_example() {
        let ring = Ring::new(8).unwrap();
        let sv = ShareVector {
            ring,
            shares: vec![200, 17, 44],
        };
        assert_eq!(reconstruct(&sv).unwrap(), 5);
    }

    #[test]
    fn round_trips_at_several_widths() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for bits in [8, 32, 64] {
            let ring = Ring::new(bits).unwrap();
            for _ in 0..1000 {
                let v = ring.random(&mut rng);
                let r = rng.gen_range(2..8);
                let sv = share(v, r, ring, &mut rng).unwrap();
                assert_eq!(sv.shares.len(), r);
                assert_eq!(reconstruct(&sv).unwrap(), v);
            }
        }
    }

    #[test]
    fn errors() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert!(matches!(
            share(1, 1, Ring::default(), &mut rng),
            Err(Error::Input(_))
        ));
        assert!(share(256, 2, Ring::new(8).unwrap(), &mut rng).is_err());
        assert!(Ring::new(0).is_err() && Ring::new(65).is_err());
        let a = ShareVector {
            ring: Ring::new(8).unwrap(),
            shares: vec![1],
        };
        let b = ShareVector {
            ring: Ring::new(16).unwrap(),
            shares: vec![1],
        };
        assert!(matches!(reconstruct_parts(&[a, b]), Err(Error::Input(_))));
    }

    #[test]
    fn strict_subsets_reveal_nothing() {
        // enumerate all share vectors for every secret at 4 bits, 3 parties;
        // for every strict subset the induced distribution must not depend on
        // the secret
        let ring = Ring::new(4).unwrap();
        let subsets: [&[usize]; 6] = [&[0], &[1], &[2], &[0, 1], &[0, 2], &[1, 2]];
        for subset in subsets {
            let mut reference: Option<Vec<u32>> = None;
            for secret in 0..16u64 {
                let mut counts = vec![0u32; 256];
                for s0 in 0..16u64 {
                    for s1 in 0..16u64 {
                        let all = [s0, s1, ring.sub(secret, ring.add(s0, s1))];
                        let key = subset.iter().fold(0usize, |k, &i| k * 16 + all[i] as usize);
                        counts[key] += 1;
                    }
                }
                match &reference {
                    None => reference = Some(counts),
                    Some(r) => assert_eq!(r, &counts, "subset {subset:?} leaks secret {secret}"),
                }
            }
        }
    }
}
