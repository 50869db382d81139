//! Local randomizers and their calibrated server-side estimators.

mod grr;
pub mod hash;
mod report;
mod solh;
mod unary;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use grr::GrrConfig;
pub use hash::{HashFamily, HASH_VERSION};
pub use report::{BitVector, FrequencyVector, Report, ReportKind};
pub use solh::SolhConfig;
pub use unary::{AueConfig, UeConfig, DEFAULT_MAX_BITS};

use crate::amplification::{self, AmplificationParams};
use crate::error::{Error, Result};

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::config(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    Ok(())
}

/// A finite domain `0..size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Domain(usize);

impl Domain {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::config(format!(
                "domain needs at least 2 values, got {size}"
            )));
        }
        Ok(Domain(size))
    }

    pub fn size(&self) -> usize {
        self.0
    }

    pub fn check(&self, v: usize) -> Result<()> {
        if v >= self.0 {
            return Err(Error::input(format!(
                "value {v} outside domain of size {}",
                self.0
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismTag {
    Grr,
    Solh,
    Ue,
    Aue,
}

impl std::fmt::Display for MechanismTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MechanismTag::Grr => "GRR",
            MechanismTag::Solh => "SOLH",
            MechanismTag::Ue => "UE",
            MechanismTag::Aue => "AUE",
        })
    }
}

/// Split of a randomizer's output distribution into a value-dependent part
/// with mass `1 - gamma` and a uniform part with mass `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlanketDecomposition {
    pub gamma: f64,
}

impl BlanketDecomposition {
    pub fn value_dependent_mass(&self) -> f64 {
        1.0 - self.gamma
    }
}

/// Any of the frequency oracles, for callers that pick one at run time.
#[derive(Debug, Clone, PartialEq)]
pub enum Mechanism {
    Grr(GrrConfig),
    Solh(SolhConfig),
    Ue(UeConfig),
    Aue(AueConfig),
}

impl Mechanism {
    pub fn tag(&self) -> MechanismTag {
        match self {
            Mechanism::Grr(_) => MechanismTag::Grr,
            Mechanism::Solh(_) => MechanismTag::Solh,
            Mechanism::Ue(_) => MechanismTag::Ue,
            Mechanism::Aue(_) => MechanismTag::Aue,
        }
    }

    pub fn domain_size(&self) -> usize {
        match self {
            Mechanism::Grr(c) => c.d(),
            Mechanism::Solh(c) => c.d(),
            Mechanism::Ue(c) => c.d(),
            Mechanism::Aue(c) => c.d(),
        }
    }

    pub fn perturb<R: Rng + ?Sized>(&self, v: usize, rng: &mut R) -> Result<Report> {
        match self {
            Mechanism::Grr(c) => c.perturb(v, rng),
            Mechanism::Solh(c) => c.perturb(v, rng),
            Mechanism::Ue(c) => c.perturb(v, rng),
            Mechanism::Aue(c) => c.encode(v, rng),
        }
    }

    pub fn aggregate(&self, reports: &[Report]) -> Result<FrequencyVector> {
        match self {
            Mechanism::Grr(c) => c.aggregate(reports),
            Mechanism::Solh(c) => c.aggregate(reports),
            Mechanism::Ue(c) => c.aggregate(reports),
            Mechanism::Aue(c) => c.aggregate(reports),
        }
    }

    /// Exact variance of one estimate at true frequency `f_v` from `n` reports.
    pub fn variance(&self, n: usize, f_v: f64) -> f64 {
        match self {
            Mechanism::Grr(c) => c.variance(n, f_v),
            Mechanism::Solh(c) => c.variance(n, f_v),
            Mechanism::Ue(c) => c.variance(n, f_v),
            Mechanism::Aue(c) => c.variance(n),
        }
    }

    /// `None` for AUE, which is not a local randomizer.
    pub fn blanket(&self) -> Option<BlanketDecomposition> {
        let gamma = match self {
            Mechanism::Grr(c) => c.d() as f64 * c.q(),
            Mechanism::Solh(c) => {
                let k = c.d_prime() as f64;
                k * (1.0 - c.p()) / (k - 1.0)
            }
            Mechanism::Ue(c) => c.gamma(),
            Mechanism::Aue(_) => return None,
        };
        Some(BlanketDecomposition { gamma })
    }
}

/// Blanket decomposition of a local randomizer.
pub fn blanket_decompose(mechanism: &Mechanism) -> Option<BlanketDecomposition> {
    mechanism.blanket()
}

/// Picks GRR or SOLH by comparing their analytic variances at the same
/// central budget. SOLH uses the variance-optimal hash range, capped at `d`.
/// Ties go to SOLH, whose reports are smaller.
pub fn choose_mechanism(params: &AmplificationParams) -> Result<MechanismTag> {
    let grr = amplification::var_grr(params.epsilon_c, params.n, params.d, params.delta).ok();
    let solh = solh_candidate(params).ok();
    match (grr, solh) {
        (None, None) => Err(Error::infeasible(format!(
            "neither GRR nor SOLH is feasible at m = {:.4}",
            params.m()
        ))),
        (Some(_), None) => Ok(MechanismTag::Grr),
        (None, Some(_)) => Ok(MechanismTag::Solh),
        (Some(g), Some(s)) => Ok(if g.variance < s.variance {
            MechanismTag::Grr
        } else {
            MechanismTag::Solh
        }),
    }
}

fn solh_candidate(params: &AmplificationParams) -> Result<amplification::VarianceEstimate> {
    let d_prime = match amplification::optimal_dprime(params.epsilon_c, params.n, params.delta) {
        Ok(k) => k.min(params.d as u32),
        Err(_) if params.m() > 2.0 => 2,
        Err(e) => return Err(e),
    };
    amplification::var_solh(params.epsilon_c, params.n, d_prime, params.delta)
}
