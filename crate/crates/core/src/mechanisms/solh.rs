use rand::Rng;
use rayon::prelude::*;

use super::grr::{randomized_response, rr_probabilities};
use super::hash::HashFamily;
use super::{check_epsilon, FrequencyVector, Report};
use crate::error::{Error, Result};

/// Local hashing tuned for the shuffle model: hash into `0..d'` with a
/// randomly seeded hash, then apply d'-ary randomized response.
#[derive(Debug, Clone, PartialEq)]
pub struct SolhConfig {
    epsilon: f64,
    d: usize,
    d_prime: u32,
    hash: HashFamily,
    p: f64,
    /// Chance a report supports a value the user does not hold.
    baseline: f64,
}

impl SolhConfig {
    pub fn new(epsilon: f64, d: usize, d_prime: u32) -> Result<Self> {
        Self::with_hash(epsilon, d, d_prime, HashFamily::default())
    }

    pub fn with_hash(epsilon: f64, d: usize, d_prime: u32, hash: HashFamily) -> Result<Self> {
        check_epsilon(epsilon)?;
        if d_prime < 2 {
            return Err(Error::config(format!(
                "hash range d' must be >= 2, got {d_prime}"
            )));
        }
        if d_prime as usize > d {
            return Err(Error::config(format!(
                "hash range d'={d_prime} exceeds domain size d={d}"
            )));
        }
        hash.validate(d, d_prime)?;
        let (p, q) = rr_probabilities(epsilon, d_prime as usize);
        let kappa = hash.collision_rate(d, d_prime);
        let baseline = kappa * p + (1.0 - kappa) * q;
        Ok(SolhConfig {
            epsilon,
            d,
            d_prime,
            hash,
            p,
            baseline,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn d_prime(&self) -> u32 {
        self.d_prime
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn hash_family(&self) -> &HashFamily {
        &self.hash
    }

    /// Probability that a report supports a value other than the user's;
    /// `1/d'` for a universal family.
    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn perturb<R: Rng + ?Sized>(&self, v: usize, rng: &mut R) -> Result<Report> {
        if v >= self.d {
            return Err(Error::input(format!(
                "value {v} outside domain of size {}",
                self.d
            )));
        }
        Ok(self.perturb_value(v as u64, rng))
    }

    /// Perturbs without the domain check; for callers whose domain does not
    /// fit in memory (prefix trees over long bit strings).
    pub fn perturb_value<R: Rng + ?Sized>(&self, v: u64, rng: &mut R) -> Report {
        let seed = rng.gen_range(0..self.hash.seed_space()) as u32;
        let h = self.hash.hash(seed, v, self.d_prime);
        let y = randomized_response(h as u64, self.d_prime as u64, self.p, rng) as u32;
        Report::Solh { seed, y }
    }

    fn unpack(&self, reports: &[Report]) -> Result<Vec<(u32, u32)>> {
        if reports.is_empty() {
            return Err(Error::input("cannot aggregate an empty report list"));
        }
        if self.epsilon == 0.0 || self.p <= self.baseline {
            return Err(Error::config(
                "reports carry no signal at this budget; the estimator divides by zero",
            ));
        }
        let seeds = self.hash.seed_space();
        reports
            .iter()
            .map(|r| match r {
                Report::Solh { seed, y } if (*seed as u64) < seeds && *y < self.d_prime => {
                    Ok((*seed, *y))
                }
                Report::Solh { .. } => Err(Error::input("SOLH report outside seed or hash range")),
                other => Err(Error::input(format!(
                    "mixed report variants: expected SOLH, found {:?}",
                    other.kind()
                ))),
            })
            .collect()
    }

    pub fn aggregate(&self, reports: &[Report]) -> Result<FrequencyVector> {
        let pairs = self.unpack(reports)?;
        let support: Vec<u64> = (0..self.d as u64)
            .into_par_iter()
            .map(|v| self.support(&pairs, v))
            .collect();
        Ok(self.calibrate(&support, pairs.len()))
    }

    /// Estimates only the listed values.
    pub fn estimate(&self, reports: &[Report], values: &[u64]) -> Result<Vec<f64>> {
        let pairs = self.unpack(reports)?;
        let support: Vec<u64> = values
            .par_iter()
            .map(|&v| self.support(&pairs, v))
            .collect();
        Ok(self.calibrate(&support, pairs.len()).0)
    }

    fn support(&self, pairs: &[(u32, u32)], v: u64) -> u64 {
        pairs
            .iter()
            .filter(|&&(s, y)| self.hash.hash(s, v, self.d_prime) == y)
            .count() as u64
    }

    fn calibrate(&self, support: &[u64], n: usize) -> FrequencyVector {
        let b = self.baseline;
        let n = n as f64;
        FrequencyVector(
            support
                .iter()
                .map(|&c| (c as f64 / n - b) / (self.p - b))
                .collect(),
        )
    }

    /// Variance of one estimate with true frequency `f_v`.
    pub fn variance(&self, n: usize, f_v: f64) -> f64 {
        let b = self.baseline;
        (f_v * self.p * (1.0 - self.p) + (1.0 - f_v) * b * (1.0 - b))
            / (n as f64 * (self.p - b).powi(2))
    }

    /// Distribution over the flattened output space `seed * d' + y`. Only
    /// meaningful for small table families.
    pub fn output_distribution(&self, v: usize) -> Vec<f64> {
        let seeds = self.hash.seed_space() as usize;
        let k = self.d_prime as usize;
        let q = (1.0 - self.p) / (k as f64 - 1.0);
        let mut dist = vec![0.0; seeds * k];
        for s in 0..seeds {
            let h = self.hash.hash(s as u32, v as u64, self.d_prime) as usize;
            for y in 0..k {
                dist[s * k + y] = if y == h { self.p } else { q } / seeds as f64;
            }
        }
        dist
    }
}
