//! Heavy-hitter search over `L`-bit strings by breadth-first prefix
//! extension. Each round extends the retained prefixes by `g` bits, estimates
//! the frequency of every extension with a frequency oracle and keeps the
//! top `k`.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::amplification::{invert_amplification, optimal_dprime};
use crate::error::{Error, Result};
use crate::mechanisms::{
    AueConfig, GrrConfig, Mechanism, MechanismTag, Report, SolhConfig, UeConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeHistMode {
    /// Every user reports every round; the central budget is split evenly.
    Shuffler,
    /// Users are split into one disjoint group per round; each group spends
    /// the full local budget.
    Ldp,
    /// SOLH only: every user sends one report per level up front and the
    /// server runs the whole search offline.
    NonInteractive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeHistConfig {
    /// Total bit length `L`, at most 64.
    pub bits: u32,
    /// Bits added per round `g`.
    pub step: u32,
    /// Number of heavy hitters returned.
    pub k: usize,
    /// Prefixes kept between rounds; defaults to `k`.
    pub k_round: usize,
    /// Central budget in the shuffler modes, local budget in LDP mode.
    pub epsilon: f64,
    pub delta: f64,
    pub estimator: MechanismTag,
    pub mode: TreeHistMode,
}

impl TreeHistConfig {
    pub fn new(bits: u32, step: u32, k: usize, epsilon: f64, delta: f64) -> Result<Self> {
        let cfg = TreeHistConfig {
            bits,
            step,
            k,
            k_round: k,
            epsilon,
            delta,
            estimator: MechanismTag::Solh,
            mode: TreeHistMode::Shuffler,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn rounds(&self) -> u32 {
        self.bits / self.step
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits == 0
            || self.bits > 64
            || self.step == 0
            || self.step > 16
            || !self.bits.is_multiple_of(self.step)
        {
            return Err(Error::config(format!(
                "need 0 < g <= 16 dividing 0 < L <= 64, got L = {}, g = {}",
                self.bits, self.step
            )));
        }
        if self.k == 0 || self.k_round == 0 {
            return Err(Error::config("k must be positive"));
        }
        if !(self.epsilon > 0.0) || !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config("need epsilon > 0 and delta in (0,1)"));
        }
        if self.mode == TreeHistMode::NonInteractive && self.estimator != MechanismTag::Solh {
            return Err(Error::config("the non-interactive mode needs SOLH"));
        }
        Ok(())
    }

    /// Per-round `(epsilon, delta)`. The last round takes the remainder so the
    /// rounds sum to the total exactly.
    pub fn round_budgets(&self) -> Vec<(f64, f64)> {
        let r = self.rounds() as usize;
        if self.mode == TreeHistMode::Ldp {
            return vec![(self.epsilon, self.delta); r];
        }
        let (e, d) = (self.epsilon / r as f64, self.delta / r as f64);
        let mut out = vec![(e, d); r];
        out[r - 1] = (
            self.epsilon - e * (r - 1) as f64,
            self.delta - d * (r - 1) as f64,
        );
        out
    }
}

/// Extensions of the retained prefixes by `g` bits plus a trailing dummy
/// index for users matching none of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateDomain {
    parents: Vec<u64>,
    lookup: HashMap<u64, usize>,
    step: u32,
}

impl CandidateDomain {
    pub fn size(&self) -> usize {
        (self.parents.len() << self.step) + 1
    }

    pub fn dummy(&self) -> usize {
        self.size() - 1
    }

    /// Index of a child prefix, or `None` when its parent was not retained.
    pub fn index(&self, child: u64) -> Option<usize> {
        let parent = child >> self.step;
        let low = (child & ((1u64 << self.step) - 1)) as usize;
        self.lookup.get(&parent).map(|&p| (p << self.step) + low)
    }

    /// The child prefix at `idx`; `None` for the dummy.
    pub fn child(&self, idx: usize) -> Option<u64> {
        if idx >= self.dummy() {
            return None;
        }
        let parent = self.parents[idx >> self.step];
        Some((parent << self.step) | (idx & ((1 << self.step) - 1)) as u64)
    }

    pub fn children(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.dummy()).map(|i| self.child(i).expect("in range"))
    }
}

pub fn candidate_domain(retained: &[u64], step: u32) -> Result<CandidateDomain> {
    if retained.is_empty() {
        return Err(Error::input("no retained prefixes"));
    }
    let mut parents = retained.to_vec();
    parents.sort_unstable();
    parents.dedup();
    let lookup = parents.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    Ok(CandidateDomain {
        parents,
        lookup,
        step,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrefixCandidate {
    pub prefix: u64,
    /// Number of `g`-bit steps in the prefix.
    pub level: u32,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub level: u32,
    pub domain_size: usize,
    pub users: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub local_epsilon: f64,
    pub mechanism: MechanismTag,
    pub retained: Vec<PrefixCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeHistResult {
    pub heavy_hitters: Vec<PrefixCandidate>,
    /// True when fewer than `k` candidates existed at the last level.
    pub short: bool,
    pub rounds: Vec<RoundSummary>,
}

/// Local randomizer for one round, given the round budget.
fn round_mechanism(
    cfg: &TreeHistConfig,
    eps: f64,
    delta: f64,
    n: usize,
    d: usize,
) -> Result<(Mechanism, f64)> {
    let local = |tag: MechanismTag, k: usize| -> f64 {
        match cfg.mode {
            TreeHistMode::Ldp => eps,
            _ => invert_amplification(tag, eps, n, k, delta).map_or(eps, |e| e.max(eps)),
        }
    };
    Ok(match cfg.estimator {
        MechanismTag::Grr => {
            let e = local(MechanismTag::Grr, d);
            (Mechanism::Grr(GrrConfig::new(e, d)?), e)
        }
        MechanismTag::Solh => {
            let d_prime = solh_range(cfg, eps, delta, n).min(d as u32).max(2);
            let e = local(MechanismTag::Solh, d_prime as usize);
            (Mechanism::Solh(SolhConfig::new(e, d, d_prime)?), e)
        }
        MechanismTag::Ue => {
            let e = local(MechanismTag::Ue, d);
            (Mechanism::Ue(UeConfig::new(e, d)?), e)
        }
        MechanismTag::Aue => {
            if cfg.mode == TreeHistMode::Ldp {
                return Err(Error::config("AUE has no local privacy guarantee"));
            }
            (
                Mechanism::Aue(AueConfig::new(eps, n, delta, d)?),
                f64::INFINITY,
            )
        }
    })
}

/// Hash range: the shuffle optimum when amplification applies, otherwise the
/// local-model optimum `e^eps + 1`.
fn solh_range(cfg: &TreeHistConfig, eps: f64, delta: f64, n: usize) -> u32 {
    let olh = || (eps.exp() + 1.0).round().clamp(2.0, u32::MAX as f64) as u32;
    match cfg.mode {
        TreeHistMode::Ldp => olh(),
        _ => optimal_dprime(eps, n, delta).unwrap_or_else(|_| olh()),
    }
}

fn prefix(v: u64, bits: u32, len: u32) -> u64 {
    if len == 0 {
        0
    } else {
        v >> (bits - len)
    }
}

/// Keeps the `k` best candidates; ties go to the smaller prefix.
fn top_k(mut cands: Vec<PrefixCandidate>, k: usize) -> Vec<PrefixCandidate> {
    cands.sort_by(|a, b| {
        b.estimate
            .total_cmp(&a.estimate)
            .then(a.prefix.cmp(&b.prefix))
    });
    cands.truncate(k);
    cands
}

pub fn treehist_run<R: Rng + ?Sized>(
    values: &[u64],
    cfg: &TreeHistConfig,
    rng: &mut R,
) -> Result<TreeHistResult> {
    cfg.validate()?;
    if values.is_empty() {
        return Err(Error::input("need at least one user"));
    }
    if cfg.bits < 64 {
        if let Some(v) = values.iter().find(|&&v| v >> cfg.bits != 0) {
            return Err(Error::input(format!(
                "value {v:#x} is longer than {} bits",
                cfg.bits
            )));
        }
    }
    if cfg.mode == TreeHistMode::NonInteractive {
        return non_interactive(values, cfg, rng);
    }
    let rounds = cfg.rounds();
    let budgets = cfg.round_budgets();
    let group = values.len() / rounds as usize;
    if cfg.mode == TreeHistMode::Ldp && group == 0 {
        return Err(Error::input("fewer users than rounds"));
    }
    let mut retained = vec![0u64];
    let mut summaries = Vec::with_capacity(rounds as usize);
    let mut last = Vec::new();
    for level in 1..=rounds {
        let (eps, delta) = budgets[level as usize - 1];
        let users: &[u64] = match cfg.mode {
            TreeHistMode::Ldp => &values[(level as usize - 1) * group..level as usize * group],
            _ => values,
        };
        let domain = candidate_domain(&retained, cfg.step)?;
        let (mech, local_eps) = round_mechanism(cfg, eps, delta, users.len(), domain.size())?;
        let len = level * cfg.step;
        let reports: Vec<Report> = users
            .iter()
            .map(|&v| {
                let idx = domain
                    .index(prefix(v, cfg.bits, len))
                    .unwrap_or(domain.dummy());
                mech.perturb(idx, rng)
            })
            .collect::<Result<_>>()?;
        let est = mech.aggregate(&reports)?;
        let cands: Vec<PrefixCandidate> = domain
            .children()
            .enumerate()
            .map(|(i, p)| PrefixCandidate {
                prefix: p,
                level,
                estimate: est[i],
            })
            .collect();
        let keep = if level == rounds { cfg.k } else { cfg.k_round };
        let short = cands.len() < keep;
        let best = top_k(cands, keep);
        retained = best.iter().map(|c| c.prefix).collect();
        summaries.push(RoundSummary {
            level,
            domain_size: domain.size(),
            users: users.len(),
            epsilon: eps,
            delta,
            local_epsilon: local_eps,
            mechanism: mech.tag(),
            retained: best.clone(),
        });
        last = best;
        if level == rounds {
            return Ok(TreeHistResult {
                heavy_hitters: last,
                short,
                rounds: summaries,
            });
        }
    }
    Ok(TreeHistResult {
        heavy_hitters: last,
        short: false,
        rounds: summaries,
    })
}

/// Level-tagged encoding so that reports for different levels never collide.
fn level_key(level: u32, prefix: u64) -> u64 {
    ((level as u64) << 58) ^ prefix
}

fn non_interactive<R: Rng + ?Sized>(
    values: &[u64],
    cfg: &TreeHistConfig,
    rng: &mut R,
) -> Result<TreeHistResult> {
    let rounds = cfg.rounds();
    let budgets = cfg.round_budgets();
    let n = values.len();
    // users report every level at once
    let mut per_level = Vec::with_capacity(rounds as usize);
    for level in 1..=rounds {
        let (eps, delta) = budgets[level as usize - 1];
        let d_prime = solh_range(cfg, eps, delta, n).max(2);
        let local = invert_amplification(MechanismTag::Solh, eps, n, d_prime as usize, delta)
            .map_or(eps, |e| e.max(eps));
        // the domain is implicit; any size >= d' passes validation
        let mech = SolhConfig::new(local, u32::MAX as usize, d_prime)?;
        let len = level * cfg.step;
        let reports: Vec<Report> = values
            .iter()
            .map(|&v| mech.perturb_value(level_key(level, prefix(v, cfg.bits, len)), rng))
            .collect();
        per_level.push((mech, reports, eps, delta, local));
    }
    let mut retained = vec![0u64];
    let mut summaries = Vec::new();
    let mut short = false;
    for level in 1..=rounds {
        let (mech, reports, eps, delta, local) = &per_level[level as usize - 1];
        let domain = candidate_domain(&retained, cfg.step)?;
        let children: Vec<u64> = domain.children().collect();
        let keys: Vec<u64> = children.iter().map(|&c| level_key(level, c)).collect();
        let est = mech.estimate(reports, &keys)?;
        let cands = children
            .iter()
            .zip(est)
            .map(|(&p, e)| PrefixCandidate {
                prefix: p,
                level,
                estimate: e,
            })
            .collect::<Vec<_>>();
        let keep = if level == rounds { cfg.k } else { cfg.k_round };
        short = cands.len() < keep;
        let best = top_k(cands, keep);
        retained = best.iter().map(|c| c.prefix).collect();
        summaries.push(RoundSummary {
            level,
            domain_size: domain.size() - 1,
            users: n,
            epsilon: *eps,
            delta: *delta,
            local_epsilon: *local,
            mechanism: MechanismTag::Solh,
            retained: best,
        });
    }
    let heavy_hitters = summaries
        .last()
        .map(|s| s.retained.clone())
        .unwrap_or_default();
    Ok(TreeHistResult {
        heavy_hitters,
        short,
        rounds: summaries,
    })
}

/// F1 score of a recovered set against the true heavy hitters.
pub fn f1_score(found: &[u64], truth: &[u64]) -> f64 {
    if found.is_empty() || truth.is_empty() {
        return 0.0;
    }
    let hits = found.iter().filter(|f| truth.contains(f)).count() as f64;
    if hits == 0.0 {
        return 0.0;
    }
    let (precision, recall) = (hits / found.len() as f64, hits / truth.len() as f64);
    2.0 * precision * recall / (precision + recall)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn domain_sizes() {
        assert_eq!(candidate_domain(&[0x12], 8).unwrap().size(), 257);
        let root = candidate_domain(&[0], 1).unwrap();
        assert_eq!(root.size(), 3);
        assert_eq!(root.children().collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(root.child(2), None);
    }

    #[test]
    fn domain_index_is_bijective() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..20 {
            let retained: Vec<u64> = (0..rng.gen_range(1..30))
                .map(|_| rng.gen_range(0..1000))
                .collect();
            let dom = candidate_domain(&retained, 4).unwrap();
            for i in 0..dom.dummy() {
                assert_eq!(dom.index(dom.child(i).unwrap()), Some(i));
            }
            assert_eq!(dom.index(5000 << 4), None);
        }
    }

    #[test]
    fn budgets_sum_exactly() {
        let mut cfg = TreeHistConfig::new(48, 8, 32, 1.0, 1e-9).unwrap();
        let b = cfg.round_budgets();
        assert_eq!(b.len(), 6);
        assert_eq!(b.iter().map(|x| x.0).sum::<f64>(), 1.0);
        assert_eq!(b.iter().map(|x| x.1).sum::<f64>(), 1e-9);
        cfg.mode = TreeHistMode::Ldp;
        assert!(cfg.round_budgets().iter().all(|&(e, _)| e == 1.0));
    }

    #[test]
    fn noiseless_single_value() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut cfg = TreeHistConfig::new(16, 8, 1, 60.0, 1e-9).unwrap();
        cfg.mode = TreeHistMode::Ldp;
        let vals = vec![0xBEEFu64; 200];
        let res = treehist_run(&vals, &cfg, &mut rng).unwrap();
        assert_eq!(res.heavy_hitters[0].prefix, 0xBEEF);
        assert!((res.heavy_hitters[0].estimate - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ties_break_lexicographically() {
        let c = |p, e| PrefixCandidate {
            prefix: p,
            level: 1,
            estimate: e,
        };
        let got = top_k(vec![c(5, 0.1), c(3, 0.1), c(9, 0.2)], 2);
        assert_eq!(got.iter().map(|c| c.prefix).collect::<Vec<_>>(), vec![9, 3]);
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1_score(&[1, 2], &[1, 2]), 1.0);
        assert_eq!(f1_score(&[1, 3], &[1, 2]), 0.5);
        assert_eq!(f1_score(&[], &[1]), 0.0);
    }
}
