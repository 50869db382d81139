use rand::Rng;

use super::grr::{debias_counts, rr_variance};
use super::{check_epsilon, BitVector, FrequencyVector, Report};
use crate::error::{Error, Result};

/// Default cap on a single unary report, in bits (32 MiB).
pub const DEFAULT_MAX_BITS: usize = 1 << 28;

/// Symmetric unary encoding (basic RAPPOR): one-hot encode, then flip every
/// bit independently with probability `1/(e^{eps/2}+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeConfig {
    epsilon: f64,
    d: usize,
    flip: f64,
    max_bits: usize,
}

impl UeConfig {
    pub fn new(epsilon: f64, d: usize) -> Result<Self> {
        check_epsilon(epsilon)?;
        if d < 2 {
            return Err(Error::config(format!(
                "unary encoding needs d >= 2, got {d}"
            )));
        }
        let flip = 1.0 / ((epsilon / 2.0).exp() + 1.0);
        Ok(UeConfig {
            epsilon,
            d,
            flip,
            max_bits: DEFAULT_MAX_BITS,
        })
    }

    /// The removal-LDP variant at budget `epsilon`, which under replacement
    /// neighbours is the symmetric encoding at `2 * epsilon`.
    pub fn removal(epsilon: f64, d: usize) -> Result<Self> {
        Self::new(2.0 * epsilon, d)
    }

    pub fn with_max_bits(mut self, max_bits: usize) -> Self {
        self.max_bits = max_bits;
        self
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn flip_probability(&self) -> f64 {
        self.flip
    }

    /// Uniform mass of the blanket decomposition, `2/(e^{eps/2}+1)`.
    pub fn gamma(&self) -> f64 {
        2.0 * self.flip
    }

    pub fn perturb<R: Rng + ?Sized>(&self, v: usize, rng: &mut R) -> Result<Report> {
        if self.d > self.max_bits {
            return Err(Error::Resource(format!(
                "unary report of {} bits exceeds the cap of {} bits",
                self.d, self.max_bits
            )));
        }
        if v >= self.d {
            return Err(Error::input(format!(
                "value {v} outside domain of size {}",
                self.d
            )));
        }
        let mut bits = BitVector::zeros(self.d);
        for i in 0..self.d {
            let one = (i == v) ^ (rng.gen::<f64>() < self.flip);
            if one {
                bits.set(i, true);
            }
        }
        Ok(Report::Bits(bits))
    }

    pub fn aggregate(&self, reports: &[Report]) -> Result<FrequencyVector> {
        if reports.is_empty() {
            return Err(Error::input("cannot aggregate an empty report list"));
        }
        let mut counts = vec![0u64; self.d];
        for r in reports {
            match r {
                Report::Bits(b) if b.len() == self.d => {
                    for i in b.iter_ones() {
                        counts[i] += 1;
                    }
                }
                Report::Bits(b) => {
                    return Err(Error::input(format!(
                        "unary report has {} bits, expected {}",
                        b.len(),
                        self.d
                    )))
                }
                other => {
                    return Err(Error::input(format!(
                        "mixed report variants: expected unary bits, found {:?}",
                        other.kind()
                    )))
                }
            }
        }
        Ok(debias_counts(
            &counts,
            reports.len(),
            1.0 - self.flip,
            self.flip,
        ))
    }

    pub fn variance(&self, n: usize, f_v: f64) -> f64 {
        rr_variance(1.0 - self.flip, self.flip, n, f_v)
    }
}

/// Appended unary encoding: the one-hot vector plus an independent increment
/// in every location with probability `p`. Not a local randomizer on its own;
/// its guarantee comes entirely from the other users' increments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AueConfig {
    d: usize,
    p: f64,
}

impl AueConfig {
    /// `p = 1 - 200 ln(4/delta) / (eps_c^2 n)`.
    pub fn new(epsilon_c: f64, n: usize, delta: f64, d: usize) -> Result<Self> {
        if !(epsilon_c > 0.0) || !(delta > 0.0 && delta < 1.0) || n == 0 {
            return Err(Error::config(
                "AUE needs eps_c > 0, delta in (0,1) and n >= 1",
            ));
        }
        let ratio = 200.0 * (4.0 / delta).ln() / (epsilon_c * epsilon_c * n as f64);
        if ratio > 1.0 {
            return Err(Error::Infeasible {
                reason: format!(
                    "eps_c^2 * n must be at least 200 ln(4/delta); ratio is {ratio:.4}"
                ),
                min_n: Some((200.0 * (4.0 / delta).ln() / (epsilon_c * epsilon_c)).ceil() as u64),
            });
        }
        Self::with_probability(1.0 - ratio, d)
    }

    pub fn with_probability(p: f64, d: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::config(format!(
                "increment probability {p} outside [0,1]"
            )));
        }
        if d < 2 {
            return Err(Error::config(format!("AUE needs d >= 2, got {d}")));
        }
        Ok(AueConfig { d, p })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn encode<R: Rng + ?Sized>(&self, v: usize, rng: &mut R) -> Result<Report> {
        if v >= self.d {
            return Err(Error::input(format!(
                "value {v} outside domain of size {}",
                self.d
            )));
        }
        let cells = (0..self.d)
            .map(|i| (i == v) as u8 + (rng.gen::<f64>() < self.p) as u8)
            .collect();
        Ok(Report::Appended(cells))
    }

    pub fn aggregate(&self, reports: &[Report]) -> Result<FrequencyVector> {
        if reports.is_empty() {
            return Err(Error::input("cannot aggregate an empty report list"));
        }
        let mut sums = vec![0u64; self.d];
        for r in reports {
            match r {
                Report::Appended(c) if c.len() == self.d => {
                    for (s, &x) in sums.iter_mut().zip(c) {
                        *s += x as u64;
                    }
                }
                other => {
                    return Err(Error::input(format!(
                        "expected appended-unary report of length {}, found {:?}",
                        self.d,
                        other.kind()
                    )))
                }
            }
        }
        let n = reports.len() as f64;
        Ok(FrequencyVector(
            sums.iter().map(|&s| (s as f64 - n * self.p) / n).collect(),
        ))
    }

    pub fn variance(&self, n: usize) -> f64 {
        self.p * (1.0 - self.p) / n as f64
    }
}
