//! Statistical audits: fake-report poisoning and exact privacy loss on tiny
//! instances.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{peos_run, replay_user_report, PeosConfig, ShufflerBehavior};
use crate::crypto::IdentityAhe;
use crate::error::{Error, Result};
use crate::mechanisms::Mechanism;

/// Largest number of output multisets the privacy oracle will enumerate.
pub const ORACLE_LIMIT: f64 = 1e7;

const MAX_BUCKETS: u128 = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoisoningReport {
    pub honest_shufflers: usize,
    /// True when no shuffler is honest, so nothing masks the attacker.
    pub vacuous: bool,
    pub samples: usize,
    pub counts: Vec<u64>,
    pub chi_square: f64,
    pub p_value: f64,
    pub uniform: bool,
}

/// Chi-square goodness of fit against the uniform distribution.
pub fn chi_square_uniform(counts: &[u64]) -> (f64, f64) {
    let total: u64 = counts.iter().sum();
    let k = counts.len();
    if k < 2 || total == 0 {
        return (0.0, 1.0);
    }
    let expect = total as f64 / k as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expect).powi(2) / expect)
        .sum();
    let dist = ChiSquared::new((k - 1) as f64).expect("positive degrees of freedom");
    (stat, 1.0 - dist.cdf(stat))
}

/// Runs `trials` protocol executions with one user and the configured
/// shuffler behaviors, and tests whether the fake reports the server ends up
/// with are uniform over the report space.
pub fn poisoning_resistance_check(cfg: &PeosConfig, trials: usize) -> Result<PoisoningReport> {
    if cfg.n_r == 0 || trials == 0 {
        return Err(Error::config(
            "poisoning check needs fake reports and at least one trial",
        ));
    }
    let honest = (0..cfg.r)
        .filter(|&j| cfg.behavior(j) == ShufflerBehavior::Honest)
        .count();
    let codec = cfg.codec()?;
    let space = codec.space();
    let buckets = space.min(MAX_BUCKETS);
    let ahe = IdentityAhe::new(cfg.ring);
    let mut counts = vec![0u64; buckets as usize];
    for trial in 0..trials {
        let mut c = cfg.clone().with_recording(super::Recording::Off);
        c.seed = cfg
            .seed
            .wrapping_add(trial as u64)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let out = peos_run(&[0], &c, &ahe, &())?;
        let mine = codec.index(&replay_user_report(&c, 0, 0)?)?;
        let mut skipped = false;
        for &idx in &out.transcript.server_output {
            if !skipped && idx == mine {
                skipped = true;
                continue;
            }
            counts[(idx as u128 * buckets / space) as usize] += 1;
        }
    }
    let (chi_square, p_value) = chi_square_uniform(&counts);
    Ok(PoisoningReport {
        honest_shufflers: honest,
        vacuous: honest == 0,
        samples: counts.iter().sum::<u64>() as usize,
        counts,
        chi_square,
        p_value,
        uniform: p_value > 0.01,
    })
}

fn output_distribution(mechanism: &Mechanism, v: usize) -> Result<Vec<f64>> {
    if v >= mechanism.domain_size() {
        return Err(Error::input(format!("value {v} outside the domain")));
    }
    match mechanism {
        Mechanism::Grr(g) => Ok(g.output_distribution(v)),
        Mechanism::Solh(s) => Ok(s.output_distribution(v)),
        other => Err(Error::config(format!(
            "{} is not enumerable here",
            other.tag()
        ))),
    }
}

fn ln_binomial(n: f64, k: f64) -> f64 {
    (1..=k as u64)
        .map(|i| ((n - k + i as f64) / i as f64).ln())
        .sum()
}

/// Distribution over output multisets (as count vectors) of independent
/// reports with the given distributions.
pub fn multiset_distribution(dists: &[Vec<f64>]) -> Result<HashMap<Vec<u16>, f64>> {
    let m = dists.first().map_or(0, Vec::len);
    if dists.iter().any(|d| d.len() != m) {
        return Err(Error::input("report distributions differ in support"));
    }
    let n = dists.len();
    let size = ln_binomial((m + n).saturating_sub(1) as f64, n as f64).exp();
    if size > ORACLE_LIMIT {
        return Err(Error::TooLarge {
            size,
            limit: ORACLE_LIMIT,
        });
    }
    let mut cur: HashMap<Vec<u16>, f64> = HashMap::from([(vec![0u16; m], 1.0)]);
    for dist in dists {
        let mut next: HashMap<Vec<u16>, f64> = HashMap::with_capacity(cur.len() * 2);
        for (ms, p) in &cur {
            for (y, &q) in dist.iter().enumerate() {
                if q == 0.0 {
                    continue;
                }
                let mut k = ms.clone();
                k[y] += 1;
                *next.entry(k).or_insert(0.0) += p * q;
            }
        }
        cur = next;
    }
    Ok(cur)
}

fn hockey_stick(p: &HashMap<Vec<u16>, f64>, q: &HashMap<Vec<u16>, f64>, threshold: f64) -> f64 {
    p.iter()
        .map(|(k, &pk)| (pk - threshold * q.get(k).copied().unwrap_or(0.0)).max(0.0))
        .sum()
}

/// Exact hockey-stick divergence between the shuffled outputs on neighboring
/// datasets `data` and `neighbor` (plus `n_r` uniform fake reports), at
/// threshold `e^epsilon`, maximized over both orderings.
pub fn privacy_loss_oracle(
    mechanism: &Mechanism,
    data: &[usize],
    neighbor: &[usize],
    n_r: usize,
    epsilon: f64,
) -> Result<f64> {
    if data.len() != neighbor.len() || data.is_empty() {
        return Err(Error::input(
            "neighboring datasets must be non-empty and equally long",
        ));
    }
    let build = |vals: &[usize]| -> Result<Vec<Vec<f64>>> {
        let mut dists = vals
            .iter()
            .map(|&v| output_distribution(mechanism, v))
            .collect::<Result<Vec<_>>>()?;
        let m = dists[0].len();
        dists.extend(std::iter::repeat_n(vec![1.0 / m as f64; m], n_r));
        Ok(dists)
    };
    let p = multiset_distribution(&build(data)?)?;
    let q = multiset_distribution(&build(neighbor)?)?;
    let t = epsilon.exp();
    Ok(hockey_stick(&p, &q, t).max(hockey_stick(&q, &p, t)))
}
