use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Packed bit vector, LSB-first within each 64-bit word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        BitVector {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn one_hot(len: usize, index: usize) -> Self {
        let mut b = Self::zeros(len);
        b.set(index, true);
        b
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let tz = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    /// Length header (u64 LE bit count) followed by the packed bytes.
    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.len as u64).to_le_bytes());
        let nbytes = self.len.div_ceil(8);
        for i in 0..nbytes {
            out.push((self.words[i / 8] >> (8 * (i % 8))) as u8);
        }
    }

    fn decode(bytes: &[u8]) -> Result<Self> {
        let (len, body) = split_len_header(bytes)?;
        if body.len() != len.div_ceil(8) {
            return Err(Error::input(
                "bit vector body does not match its length header",
            ));
        }
        let mut v = Self::zeros(len);
        for (i, &b) in body.iter().enumerate() {
            v.words[i / 8] |= (b as u64) << (8 * (i % 8));
        }
        if len % 64 != 0 {
            if let Some(last) = v.words.last() {
                if last >> (len % 64) != 0 {
                    return Err(Error::input("bit vector has bits set past its length"));
                }
            }
        }
        Ok(v)
    }
}

fn split_len_header(bytes: &[u8]) -> Result<(usize, &[u8])> {
    if bytes.len() < 8 {
        return Err(Error::input("truncated length header"));
    }
    let len = u64::from_le_bytes(bytes[..8].try_into().unwrap());
    let len = usize::try_from(len).map_err(|_| Error::input("length header too large"))?;
    Ok((len, &bytes[8..]))
}

/// One user's randomized output.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Report {
    /// A value index in `0..d`.
    Grr(u64),
    /// Hash seed and hashed-then-randomized value in `0..d'`.
    Solh { seed: u32, y: u32 },
    /// Perturbed one-hot vector (unary encoding).
    Bits(BitVector),
    /// One-hot vector plus an independent increment per location, so each
    /// location holds 0, 1 or 2.
    Appended(Vec<u8>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReportKind {
    Grr,
    Solh,
    Bits,
    Appended,
}

impl Report {
    pub fn kind(&self) -> ReportKind {
        match self {
            Report::Grr(_) => ReportKind::Grr,
            Report::Solh { .. } => ReportKind::Solh,
            Report::Bits(_) => ReportKind::Bits,
            Report::Appended(_) => ReportKind::Appended,
        }
    }

    /// Transcript wire form. GRR is an 8-byte LE index, SOLH is the 4-byte LE
    /// seed followed by the 4-byte LE value, vectors carry a u64 LE length header.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Report::Grr(v) => out.extend_from_slice(&v.to_le_bytes()),
            Report::Solh { seed, y } => {
                out.extend_from_slice(&seed.to_le_bytes());
                out.extend_from_slice(&y.to_le_bytes());
            }
            Report::Bits(b) => b.encode_into(&mut out),
            Report::Appended(c) => {
                out.extend_from_slice(&(c.len() as u64).to_le_bytes());
                out.extend_from_slice(c);
            }
        }
        out
    }

    pub fn decode(kind: ReportKind, bytes: &[u8]) -> Result<Self> {
        match kind {
            ReportKind::Grr => {
                let arr: [u8; 8] = bytes
                    .try_into()
                    .map_err(|_| Error::input("GRR report must be 8 bytes"))?;
                Ok(Report::Grr(u64::from_le_bytes(arr)))
            }
            ReportKind::Solh => {
                if bytes.len() != 8 {
                    return Err(Error::input("SOLH report must be 8 bytes"));
                }
                let seed = u32::from_le_bytes(bytes[..4].try_into().unwrap());
                let y = u32::from_le_bytes(bytes[4..].try_into().unwrap());
                Ok(Report::Solh { seed, y })
            }
            ReportKind::Bits => Ok(Report::Bits(BitVector::decode(bytes)?)),
            ReportKind::Appended => {
                let (len, body) = split_len_header(bytes)?;
                if body.len() != len || body.iter().any(|&c| c > 2) {
                    return Err(Error::input("malformed appended-unary report"));
                }
                Ok(Report::Appended(body.to_vec()))
            }
        }
    }
}

/// Estimated per-value frequencies. Entries may be negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyVector(pub Vec<f64>);

impl FrequencyVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Exact empirical histogram of `values` over `0..d`.
    pub fn histogram(values: &[usize], d: usize) -> Self {
        let mut counts = vec![0f64; d];
        for &v in values {
            counts[v] += 1.0;
        }
        let n = values.len().max(1) as f64;
        FrequencyVector(counts.into_iter().map(|c| c / n).collect())
    }

    /// Optional post-processing: clip to [0, 1] and renormalize to sum 1.
    /// Breaks unbiasedness, so it is never applied implicitly.
    pub fn clip_and_normalize(&self) -> Self {
        let clipped: Vec<f64> = self.0.iter().map(|&f| f.clamp(0.0, 1.0)).collect();
        let total: f64 = clipped.iter().sum();
        if total <= 0.0 {
            let u = 1.0 / self.0.len().max(1) as f64;
            return FrequencyVector(vec![u; self.0.len()]);
        }
        FrequencyVector(clipped.into_iter().map(|f| f / total).collect())
    }
}

impl std::ops::Index<usize> for FrequencyVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}
