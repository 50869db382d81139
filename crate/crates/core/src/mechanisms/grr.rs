use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_epsilon, FrequencyVector, Report};
use crate::error::{Error, Result};

/// Truth probability and per-other-value probability of k-ary randomized
/// response, computed without overflowing for large epsilon.
pub(crate) fn rr_probabilities(epsilon: f64, k: usize) -> (f64, f64) {
    let e = (-epsilon).exp();
    let denom = 1.0 + (k as f64 - 1.0) * e;
    (1.0 / denom, e / denom)
}

/// Report `truth` with probability `p`, otherwise a uniformly chosen other
/// index in `0..k`.
pub(crate) fn randomized_response<R: Rng + ?Sized>(truth: u64, k: u64, p: f64, rng: &mut R) -> u64 {
    if rng.gen::<f64>() < p {
        truth
    } else {
        let other = rng.gen_range(0..k - 1);
        if other >= truth {
            other + 1
        } else {
            other
        }
    }
}

/// Generalized randomized response over `0..d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrrConfig {
    epsilon: f64,
    d: usize,
    p: f64,
    q: f64,
}

impl GrrConfig {
    pub fn new(epsilon: f64, d: usize) -> Result<Self> {
        check_epsilon(epsilon)?;
        if d < 2 {
            return Err(Error::config(format!("GRR needs d >= 2, got {d}")));
        }
        let (p, q) = rr_probabilities(epsilon, d);
        Ok(GrrConfig { epsilon, d, p, q })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn perturb<R: Rng + ?Sized>(&self, v: usize, rng: &mut R) -> Result<Report> {
        if v >= self.d {
            return Err(Error::input(format!(
                "value {v} outside domain of size {}",
                self.d
            )));
        }
        Ok(Report::Grr(randomized_response(
            v as u64,
            self.d as u64,
            self.p,
            rng,
        )))
    }

    pub fn aggregate(&self, reports: &[Report]) -> Result<FrequencyVector> {
        if reports.is_empty() {
            return Err(Error::input("cannot aggregate an empty report list"));
        }
        let mut counts = vec![0u64; self.d];
        for r in reports {
            match r {
                Report::Grr(y) if (*y as usize) < self.d => counts[*y as usize] += 1,
                Report::Grr(y) => {
                    return Err(Error::input(format!("GRR report {y} outside domain")));
                }
                other => {
                    return Err(Error::input(format!(
                        "mixed report variants: expected GRR, found {:?}",
                        other.kind()
                    )))
                }
            }
        }
        Ok(debias_counts(&counts, reports.len(), self.p, self.q))
    }

    /// Exact variance of one estimate whose true frequency is `f_v`.
    pub fn variance(&self, n: usize, f_v: f64) -> f64 {
        rr_variance(self.p, self.q, n, f_v)
    }

    /// Output distribution of a single report given input `v`.
    pub fn output_distribution(&self, v: usize) -> Vec<f64> {
        (0..self.d)
            .map(|y| if y == v { self.p } else { self.q })
            .collect()
    }
}

/// `(count/n - q) / (p - q)` per location.
pub(crate) fn debias_counts(counts: &[u64], n: usize, p: f64, q: f64) -> FrequencyVector {
    let n = n as f64;
    FrequencyVector(
        counts
            .iter()
            .map(|&c| (c as f64 / n - q) / (p - q))
            .collect(),
    )
}

pub(crate) fn rr_variance(p: f64, q: f64, n: usize, f_v: f64) -> f64 {
    (f_v * p * (1.0 - p) + (1.0 - f_v) * q * (1.0 - q)) / (n as f64 * (p - q).powi(2))
}
