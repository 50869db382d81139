//! Closed-form privacy amplification, variance and parameter planning for
//! the shuffle model and for shuffling with injected fake reports.
//!
//! Everything here is a pure function of its arguments. `n` is the number of
//! real users, `k` is the randomizer's output range (`d` for GRR, `d'` for
//! SOLH), and `m = eps_c^2 (n-1) / (14 ln(2/delta))` is the blanket size that
//! a central budget `eps_c` can pay for.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::MechanismTag;

/// Constant of the binomial blanket bound.
const BLANKET: f64 = 14.0;
/// Largest local budget the planner will assign when the local target is
/// unbounded. At this budget every randomizer is numerically noiseless.
pub const MAX_LOCAL_EPSILON: f64 = 30.0;

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::config(format!(
            "delta must be in (0,1), got {delta}"
        )));
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::config(format!("need at least 2 users, got {n}")));
    }
    Ok(())
}

/// `14 ln(2/delta)`.
fn blanket_numerator(delta: f64) -> f64 {
    BLANKET * (2.0 / delta).ln()
}

/// `eps_c^2 (n-1) / (14 ln(2/delta))`.
pub fn blanket_size(epsilon_c: f64, n: usize, delta: f64) -> f64 {
    epsilon_c * epsilon_c * (n as f64 - 1.0) / blanket_numerator(delta)
}

/// The unary-encoding analogue of [`blanket_size`]:
/// `eps_c^2 (n-1) / (56 ln(4/delta))`.
pub fn unary_blanket_size(epsilon_c: f64, n: usize, delta: f64) -> f64 {
    epsilon_c * epsilon_c * (n as f64 - 1.0) / (4.0 * BLANKET * (4.0 / delta).ln())
}

/// All the knobs of one deployment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplificationParams {
    pub n: usize,
    pub delta: f64,
    pub epsilon_l: f64,
    pub epsilon_c: f64,
    pub epsilon_s: f64,
    pub d: usize,
    pub d_prime: u32,
    pub n_r: usize,
}

impl AmplificationParams {
    /// Parameters for a central budget with no fake reports; the local budget
    /// and hash range are left for the caller (or a planner) to fill in.
    pub fn for_budget(epsilon_c: f64, n: usize, d: usize, delta: f64) -> Self {
        AmplificationParams {
            n,
            delta,
            epsilon_l: f64::NAN,
            epsilon_c,
            epsilon_s: f64::INFINITY,
            d,
            d_prime: 0,
            n_r: 0,
        }
    }

    pub fn m(&self) -> f64 {
        blanket_size(self.epsilon_c, self.n, self.delta)
    }
}

/// Binomial mechanism: adding `Bin(n, p)` noise to each histogram
/// cell gives `eps_c = sqrt(14 ln(2/delta) / (n p))`.
pub fn binomial_mechanism_eps(n: f64, p: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if !(n * p > 0.0) {
        return Err(Error::infeasible(
            "binomial noise with n*p = 0 gives no privacy",
        ));
    }
    Ok((blanket_numerator(delta) / (n * p)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Amplification {
    /// The amplified bound as given by the formula.
    pub epsilon_c: f64,
    /// `min(epsilon_c, epsilon_l)`: shuffling never hurts.
    pub effective: f64,
    /// False when the formula gives no improvement over the local budget.
    pub amplified: bool,
}

/// Central budget obtained by shuffling `n` reports of an `epsilon_l`-LDP
/// randomizer with output range `k` (ignored for UE).
pub fn amplify(
    method: MechanismTag,
    epsilon_l: f64,
    n: usize,
    k: usize,
    delta: f64,
) -> Result<Amplification> {
    check_delta(delta)?;
    check_n(n)?;
    if !(epsilon_l > 0.0) {
        return Err(Error::config(format!(
            "epsilon_l must be > 0, got {epsilon_l}"
        )));
    }
    let n1 = n as f64 - 1.0;
    let epsilon_c = match method {
        MechanismTag::Grr | MechanismTag::Solh => {
            if k < 2 {
                return Err(Error::config("output range must be >= 2"));
            }
            (blanket_numerator(delta) * (epsilon_l.exp() + k as f64 - 1.0) / n1).sqrt()
        }
        MechanismTag::Ue => {
            2.0 * (BLANKET * (4.0 / delta).ln() * ((epsilon_l / 2.0).exp() + 1.0) / n1).sqrt()
        }
        MechanismTag::Aue => return Err(Error::config("AUE is not a local randomizer")),
    };
    Ok(Amplification {
        epsilon_c,
        effective: epsilon_c.min(epsilon_l),
        amplified: epsilon_c < epsilon_l,
    })
}

/// Earlier amplification bounds, kept for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriorBound {
    /// Amplification by shuffling, valid for `eps_l < 1/2`.
    SmallBudget,
    /// Distributed binary randomized response.
    BinaryRr,
    /// Privacy blanket for GRR.
    Blanket,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorBoundResult {
    pub epsilon_c: f64,
    pub condition_satisfied: bool,
}

pub fn amplify_prior_bound(
    row: PriorBound,
    epsilon_l: f64,
    n: usize,
    d: usize,
    delta: f64,
) -> Result<PriorBoundResult> {
    check_delta(delta)?;
    check_n(n)?;
    let nf = n as f64;
    Ok(match row {
        PriorBound::SmallBudget => {
            let epsilon_c = (144.0 * (1.0 / delta).ln() * epsilon_l * epsilon_l / nf).sqrt();
            PriorBoundResult {
                epsilon_c,
                condition_satisfied: epsilon_l < 0.5,
            }
        }
        PriorBound::BinaryRr => {
            let epsilon_c = (32.0 * (4.0 / delta).ln() * (epsilon_l.exp() + 1.0) / nf).sqrt();
            let lower = (192.0 / nf * (4.0 / delta).ln()).sqrt();
            PriorBoundResult {
                epsilon_c,
                condition_satisfied: d == 2 && lower < epsilon_c && epsilon_c < 1.0,
            }
        }
        PriorBound::Blanket => {
            let epsilon_c = amplify(MechanismTag::Grr, epsilon_l, n, d, delta)?.epsilon_c;
            let lower = (blanket_numerator(delta) * d as f64 / (nf - 1.0)).sqrt();
            PriorBoundResult {
                epsilon_c,
                condition_satisfied: lower < epsilon_c && epsilon_c <= 1.0,
            }
        }
    })
}

/// Local budget that shuffling amplifies to exactly `epsilon_c`.
pub fn invert_amplification(
    method: MechanismTag,
    epsilon_c: f64,
    n: usize,
    k: usize,
    delta: f64,
) -> Result<f64> {
    check_delta(delta)?;
    check_n(n)?;
    match method {
        MechanismTag::Grr | MechanismTag::Solh => {
            let m = blanket_size(epsilon_c, n, delta);
            let arg = m - k as f64 + 1.0;
            if arg <= 1.0 {
                // need m > k, i.e. n - 1 > k * 14 ln(2/delta) / eps_c^2
                let min_n = (k as f64 * blanket_numerator(delta) / (epsilon_c * epsilon_c)).floor()
                    as u64
                    + 2;
                return Err(Error::Infeasible {
                    reason: format!("blanket size m = {m:.3} does not exceed output range {k}"),
                    min_n: Some(min_n),
                });
            }
            Ok(arg.ln())
        }
        MechanismTag::Ue => {
            let m = unary_blanket_size(epsilon_c, n, delta);
            if m <= 2.0 {
                let min_n = (2.0 * 4.0 * BLANKET * (4.0 / delta).ln() / (epsilon_c * epsilon_c))
                    .floor() as u64
                    + 2;
                return Err(Error::Infeasible {
                    reason: format!("unary blanket size {m:.3} must exceed 2"),
                    min_n: Some(min_n),
                });
            }
            Ok(2.0 * (m - 1.0).ln())
        }
        MechanismTag::Aue => Err(Error::config("AUE is not a local randomizer")),
    }
}

/// Analytic per-value variance of an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub mechanism: MechanismTag,
    pub variance: f64,
}

/// GRR at central budget `epsilon_c`: `(m-1) / (n (m-d)^2)`.
pub fn var_grr(epsilon_c: f64, n: usize, d: usize, delta: f64) -> Result<VarianceEstimate> {
    check_delta(delta)?;
    check_n(n)?;
    let m = blanket_size(epsilon_c, n, delta);
    if m <= d as f64 {
        return Err(Error::infeasible(format!(
            "GRR needs m > d, have m = {m:.3}, d = {d}"
        )));
    }
    Ok(VarianceEstimate {
        mechanism: MechanismTag::Grr,
        variance: (m - 1.0) / (n as f64 * (m - d as f64).powi(2)),
    })
}

/// Unary encoding at central budget `epsilon_c`: `(m-1) / (n (m-2)^2)` with the
/// unary blanket size.
pub fn var_ue(epsilon_c: f64, n: usize, delta: f64) -> Result<VarianceEstimate> {
    check_delta(delta)?;
    check_n(n)?;
    let m = unary_blanket_size(epsilon_c, n, delta);
    if m <= 2.0 {
        return Err(Error::infeasible(format!(
            "unary encoding needs m > 2, have {m:.3}"
        )));
    }
    Ok(VarianceEstimate {
        mechanism: MechanismTag::Ue,
        variance: (m - 1.0) / (n as f64 * (m - 2.0).powi(2)),
    })
}

/// `Var(m, d') = m^2 / (n (m-d')^2 (d'-1))`.
pub fn solh_variance_at(m: f64, n: usize, d_prime: f64) -> f64 {
    m * m / (n as f64 * (m - d_prime).powi(2) * (d_prime - 1.0))
}

/// SOLH at central budget `epsilon_c` with hash range `d_prime`.
pub fn var_solh(epsilon_c: f64, n: usize, d_prime: u32, delta: f64) -> Result<VarianceEstimate> {
    check_delta(delta)?;
    check_n(n)?;
    let m = blanket_size(epsilon_c, n, delta);
    if d_prime < 2 || m <= d_prime as f64 {
        return Err(Error::infeasible(format!(
            "SOLH needs 2 <= d' < m, have d' = {d_prime}, m = {m:.3}"
        )));
    }
    Ok(VarianceEstimate {
        mechanism: MechanismTag::Solh,
        variance: solh_variance_at(m, n, d_prime as f64),
    })
}

/// Hash range minimizing `Var(m, d')`. Starts from `(m+2)/3` rounded to the
/// nearest integer and walks to the local minimum among integers.
pub fn optimal_dprime(epsilon_c: f64, n: usize, delta: f64) -> Result<u32> {
    check_delta(delta)?;
    check_n(n)?;
    let m = blanket_size(epsilon_c, n, delta);
    if m < 4.0 {
        return Err(Error::infeasible(format!(
            "optimal d' needs m >= 4, have {m:.3}"
        )));
    }
    let hi = (m.ceil() - 1.0).max(2.0);
    let var = |k: f64| solh_variance_at(m, n, k);
    let mut k = ((m + 2.0) / 3.0).round().clamp(2.0, hi);
    while k > 2.0 && var(k - 1.0) < var(k) {
        k -= 1.0;
    }
    while k < hi && var(k + 1.0) < var(k) {
        k += 1.0;
    }
    Ok(k as u32)
}

/// Guarantees of shuffling with `n_r` uniform fake reports injected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeosEpsilon {
    /// Against the server alone.
    pub epsilon_c: f64,
    /// Against the server colluding with all other users; infinite when
    /// `n_r == 0`.
    pub epsilon_s: f64,
}

fn check_peos_method(method: MechanismTag) -> Result<()> {
    match method {
        MechanismTag::Grr | MechanismTag::Solh => Ok(()),
        other => Err(Error::config(format!(
            "{other} cannot be used with fake-report shuffling"
        ))),
    }
}

pub fn peos_eps(
    method: MechanismTag,
    epsilon_l: f64,
    n: usize,
    n_r: usize,
    k: usize,
    delta: f64,
) -> Result<PeosEpsilon> {
    check_peos_method(method)?;
    check_delta(delta)?;
    check_n(n)?;
    if k < 2 {
        return Err(Error::config("output range must be >= 2"));
    }
    let a = blanket_numerator(delta);
    let kf = k as f64;
    let epsilon_s = if n_r == 0 {
        f64::INFINITY
    } else {
        (a * kf / n_r as f64).sqrt()
    };
    // (n-1)/(e^eps + k - 1), evaluated so that eps = inf gives 0
    let user_blanket =
        (n as f64 - 1.0) * (-epsilon_l).exp() / (1.0 + (kf - 1.0) * (-epsilon_l).exp());
    let blanket = user_blanket + n_r as f64 / kf;
    let epsilon_c = if blanket > 0.0 {
        (a / blanket).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(PeosEpsilon {
        epsilon_c,
        epsilon_s,
    })
}

/// Variance of the debiased estimate after shuffling `n` real reports with
/// `n_r` uniform fakes, at local budget `epsilon_l`.
///
/// SOLH uses the base variance with `n + n_r` reports scaled by
/// `((n+n_r)/n)^2`, which is exact because a uniform fake contributes the same
/// variance as a non-matching user. For GRR a uniform fake has variance
/// `(1/d)(1-1/d)` rather than `q(1-q)`, and that term is kept separately.
pub fn peos_var(
    method: MechanismTag,
    epsilon_l: f64,
    n: usize,
    n_r: usize,
    k: usize,
    delta: f64,
) -> Result<VarianceEstimate> {
    check_peos_method(method)?;
    check_delta(delta)?;
    check_n(n)?;
    if k < 2 || !(epsilon_l > 0.0) {
        return Err(Error::infeasible(
            "need epsilon_l > 0 and output range >= 2",
        ));
    }
    let (nf, total, kf) = (n as f64, (n + n_r) as f64, k as f64);
    let e = (-epsilon_l).exp();
    let denom = 1.0 + (kf - 1.0) * e;
    let (p, q) = (1.0 / denom, e / denom);
    let variance = match method {
        MechanismTag::Solh => {
            let inv = 1.0 / kf;
            let base = inv * (1.0 - inv) / (total * (p - inv).powi(2));
            (total / nf).powi(2) * base
        }
        MechanismTag::Grr => {
            let inv = 1.0 / kf;
            (nf * q * (1.0 - q) + n_r as f64 * inv * (1.0 - inv)) / (nf * nf * (p - q).powi(2))
        }
        _ => unreachable!(),
    };
    Ok(VarianceEstimate {
        mechanism: method,
        variance,
    })
}

/// Local budget at which [`peos_eps`] meets `epsilon_c` exactly, or infinity
/// when the fakes alone already provide it.
pub fn peos_local_budget(
    epsilon_c: f64,
    n: usize,
    n_r: usize,
    k: usize,
    delta: f64,
) -> Result<f64> {
    let a = blanket_numerator(delta) / (epsilon_c * epsilon_c);
    let rest = a - n_r as f64 / k as f64;
    if rest <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let arg = (n as f64 - 1.0) / rest - k as f64 + 1.0;
    if arg <= 1.0 {
        return Err(Error::infeasible(format!(
            "eps_c = {epsilon_c} unreachable with n_r = {n_r} and range {k}"
        )));
    }
    Ok(arg.ln())
}

/// [`peos_var`] with the local budget implied by a central target.
pub fn peos_var_at_eps_c(
    method: MechanismTag,
    epsilon_c: f64,
    n: usize,
    n_r: usize,
    k: usize,
    delta: f64,
) -> Result<VarianceEstimate> {
    check_delta(delta)?;
    check_n(n)?;
    let eps_l = peos_local_budget(epsilon_c, n, n_r, k, delta)?;
    peos_var(method, eps_l, n, n_r, k, delta)
}

/// Continuous minimizer `((b + n_r)/a + 2)/3` of the fake-report SOLH
/// variance, with `a = 14 ln(2/delta)/eps_c^2` and `b = n - 1`.
pub fn peos_dprime_closed_form(epsilon_c: f64, n: usize, n_r: usize, delta: f64) -> f64 {
    let a = blanket_numerator(delta) / (epsilon_c * epsilon_c);
    (((n as f64 - 1.0) + n_r as f64) / a + 2.0) / 3.0
}

/// Hash range minimizing the fake-report SOLH variance, by exhaustive integer
/// search over the feasible range.
pub fn peos_optimal_dprime(epsilon_c: f64, n: usize, n_r: usize, delta: f64) -> Result<u32> {
    check_delta(delta)?;
    check_n(n)?;
    let a = blanket_numerator(delta) / (epsilon_c * epsilon_c);
    let upper = (((n as f64 - 1.0) + n_r as f64) / a)
        .ceil()
        .min(u32::MAX as f64) as u64;
    let mut best: Option<(u32, f64)> = None;
    for k in 2..=upper.max(2) {
        let k32 = k as u32;
        if let Ok(v) = peos_var_at_eps_c(MechanismTag::Solh, epsilon_c, n, n_r, k as usize, delta) {
            if best.is_none_or(|(_, bv)| v.variance < bv) {
                best = Some((k32, v.variance));
            }
        }
    }
    best.map(|(k, _)| k).ok_or_else(|| {
        Error::infeasible(format!(
            "no hash range reaches eps_c = {epsilon_c} with n = {n}, n_r = {n_r}"
        ))
    })
}

/// Privacy targets against the server (`eps_server`), the server colluding
/// with other users (`eps_users`), and the server colluding with a minority of
/// shufflers (`eps_aux`). Use `f64::INFINITY` for "no constraint".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanTargets {
    pub eps_server: f64,
    pub eps_users: f64,
    pub eps_aux: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Achieved {
    pub epsilon_c: f64,
    pub epsilon_s: f64,
    pub epsilon_l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub mechanism: MechanismTag,
    pub epsilon_l: f64,
    pub n_r: usize,
    /// Hash range for SOLH, domain size for GRR.
    pub d_prime: u32,
    pub variance: f64,
    pub achieved: Achieved,
}

/// Largest hash range the planner considers.
const PLAN_MAX_RANGE: usize = 1 << 16;
const PLAN_SCAN: usize = 96;

/// Chooses mechanism, local budget, fake count and hash range minimizing the
/// debiased variance subject to all three privacy targets.
///
/// For a fixed range `k` and fake count `n_r` the best local budget is the
/// largest one allowed (variance falls with `eps_l`), which is closed form.
/// That leaves a one-dimensional search over `n_r`, bounded below by the
/// `eps_users` target and above by the count at which `eps_l` hits `eps_aux`.
pub fn plan_parameters(targets: PlanTargets, n: usize, d: usize, delta: f64) -> Result<PlanResult> {
    check_delta(delta)?;
    check_n(n)?;
    if d < 2 {
        return Err(Error::config("domain needs at least 2 values"));
    }
    let PlanTargets {
        eps_server,
        eps_users,
        eps_aux,
    } = targets;
    if !(eps_server > 0.0 && eps_users > 0.0 && eps_aux > 0.0) {
        return Err(Error::config("privacy targets must be positive"));
    }
    let best = plan_search(targets, n, d, delta);
    best.ok_or_else(|| {
        let relaxed = |t: PlanTargets| plan_search(t, n, d, delta).is_some();
        let binding = if relaxed(PlanTargets {
            eps_aux: f64::INFINITY,
            ..targets
        }) {
            "eps_aux"
        } else if relaxed(PlanTargets {
            eps_users: f64::INFINITY,
            ..targets
        }) {
            "eps_users"
        } else {
            "eps_server"
        };
        Error::Infeasible {
            reason: format!(
                "no configuration satisfies the targets; binding constraint: {binding}"
            ),
            min_n: None,
        }
    })
}

fn plan_search(targets: PlanTargets, n: usize, d: usize, delta: f64) -> Option<PlanResult> {
    let cap = targets.eps_aux.min(MAX_LOCAL_EPSILON);
    let mut best: Option<PlanResult> = None;
    let mut consider = |cand: Option<PlanResult>| {
        if let Some(c) = cand {
            let better = match &best {
                None => true,
                Some(b) => {
                    c.variance < b.variance
                        || (c.variance == b.variance
                            && c.mechanism == MechanismTag::Solh
                            && b.mechanism == MechanismTag::Grr)
                }
            };
            if better {
                best = Some(c);
            }
        }
    };
    consider(plan_for_range(MechanismTag::Grr, d, targets, cap, n, delta));
    for k in 2..=d.min(PLAN_MAX_RANGE) {
        consider(plan_for_range(
            MechanismTag::Solh,
            k,
            targets,
            cap,
            n,
            delta,
        ));
    }
    best
}

fn plan_for_range(
    method: MechanismTag,
    k: usize,
    targets: PlanTargets,
    cap: f64,
    n: usize,
    delta: f64,
) -> Option<PlanResult> {
    let a_num = blanket_numerator(delta);
    let kf = k as f64;
    let a = a_num / (targets.eps_server * targets.eps_server);
    let b = n as f64 - 1.0;
    let n_r_min = if targets.eps_users.is_finite() {
        (a_num * kf / (targets.eps_users * targets.eps_users)).ceil()
    } else {
        0.0
    };
    // below this count no positive local budget meets eps_server
    let feasible_from = if kf * a - b >= 0.0 {
        (kf * a - b).floor() + 1.0
    } else {
        0.0
    };
    let lo = n_r_min.max(feasible_from);
    // beyond this count the local budget is pinned at the cap
    let n_cap = kf * (a - b / (cap.exp() + kf - 1.0));
    let hi = n_cap.ceil().max(lo);
    if !lo.is_finite() || lo > 1e15 {
        return None;
    }

    let eval = |n_r: f64| -> Option<PlanResult> {
        let n_r = n_r as usize;
        let eps_l = match peos_local_budget(targets.eps_server, n, n_r, k, delta) {
            Ok(e) => e.min(cap),
            Err(_) => return None,
        };
        // shave rounding so the achieved budget never exceeds the target
        let eps_l = if eps_l < cap {
            eps_l * (1.0 - 1e-12)
        } else {
            eps_l
        };
        if !(eps_l > 0.0) {
            return None;
        }
        let eps = peos_eps(method, eps_l, n, n_r, k, delta).ok()?;
        if eps.epsilon_c > targets.eps_server
            || eps.epsilon_s > targets.eps_users
            || eps_l > targets.eps_aux
        {
            return None;
        }
        let var = peos_var(method, eps_l, n, n_r, k, delta).ok()?;
        Some(PlanResult {
            mechanism: method,
            epsilon_l: eps_l,
            n_r,
            d_prime: k as u32,
            variance: var.variance,
            achieved: Achieved {
                epsilon_c: eps.epsilon_c,
                epsilon_s: eps.epsilon_s,
                epsilon_l: eps_l,
            },
        })
    };

    let better = |x: &Option<PlanResult>, y: &Option<PlanResult>| match (x, y) {
        (Some(a), Some(b)) => a.variance < b.variance,
        (Some(_), None) => true,
        _ => false,
    };

    let mut best: Option<PlanResult> = None;
    let mut best_at = lo;
    let probe = |n_r: f64, best: &mut Option<PlanResult>, best_at: &mut f64| {
        let c = eval(n_r);
        if better(&c, best) {
            *best = c;
            *best_at = n_r;
        }
    };
    for n_r in [lo, n_cap.floor().max(lo), hi, hi + 1.0] {
        probe(n_r, &mut best, &mut best_at);
    }
    if hi - lo > 2.0 {
        // scan the binding region, then refine around the best sample
        let step = (hi - lo) / PLAN_SCAN as f64;
        for i in 1..PLAN_SCAN {
            probe((lo + step * i as f64).round(), &mut best, &mut best_at);
        }
        let (mut l, mut r) = (
            (best_at - step).max(lo).floor(),
            (best_at + step).min(hi).ceil(),
        );
        while r - l > 2.0 {
            let m1 = (l + (r - l) / 3.0).floor();
            let m2 = (r - (r - l) / 3.0).ceil();
            let (v1, v2) = (eval(m1), eval(m2));
            if better(&v2, &v1) {
                l = m1;
            } else {
                r = m2;
            }
        }
        let mut x = l;
        while x <= r {
            probe(x, &mut best, &mut best_at);
            x += 1.0;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    const KOSARAK_N: usize = 990_002;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        ((a - b) / b).abs() <= rel
    }

    #[test]
    fn binomial_mechanism_reference_point() {
        let e = binomial_mechanism_eps(1e6, 1.0 / 150.0, 1e-9).unwrap();
        assert!((e - 0.2121).abs() < 5e-5, "{e}");
        assert!(binomial_mechanism_eps(1e6, 0.0, 1e-9).is_err());
        let e2 = binomial_mechanism_eps(2e6, 1.0 / 150.0, 1e-9).unwrap();
        assert!((e / e2 - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn amplify_solh_reference_point() {
        let a = amplify(MechanismTag::Solh, 100f64.ln(), 1_000_001, 51, 1e-9).unwrap();
        assert!((a.epsilon_c - 0.2121).abs() < 5e-5);
        assert!(a.amplified);
        let b = binomial_mechanism_eps(1e6, 1.0 / 150.0, 1e-9).unwrap();
        assert!((a.epsilon_c - b).abs() < 1e-12);
    }

    #[test]
    fn amplify_flags_no_amplification() {
        let a = amplify(MechanismTag::Grr, 0.1, 1000, 50, 1e-9).unwrap();
        assert!(!a.amplified);
        assert_eq!(a.effective, 0.1);
    }

    #[test]
    fn binary_grr_and_solh_coincide() {
        for eps in [0.5, 1.0, 3.0] {
            let g = amplify(MechanismTag::Grr, eps, 10_000, 2, 1e-6).unwrap();
            let s = amplify(MechanismTag::Solh, eps, 10_000, 2, 1e-6).unwrap();
            assert_eq!(g.epsilon_c, s.epsilon_c);
        }
    }

    #[test]
    fn prior_bounds() {
        let r = amplify_prior_bound(PriorBound::SmallBudget, 0.4, 1_000_000, 10, 1e-9).unwrap();
        assert!((r.epsilon_c - 0.02185).abs() < 5e-6, "{}", r.epsilon_c);
        assert!(r.condition_satisfied);
        assert!(
            !amplify_prior_bound(PriorBound::SmallBudget, 0.6, 1_000_000, 10, 1e-9)
                .unwrap()
                .condition_satisfied
        );
        let b = amplify_prior_bound(PriorBound::Blanket, 2.0, 1_000_000, 10, 1e-9).unwrap();
        assert_eq!(
            b.epsilon_c,
            amplify(MechanismTag::Grr, 2.0, 1_000_000, 10, 1e-9)
                .unwrap()
                .epsilon_c
        );
        assert!(b.condition_satisfied);
        let c = amplify_prior_bound(PriorBound::BinaryRr, 2.0, 1_000_000, 3, 1e-9).unwrap();
        assert!(
            !c.condition_satisfied,
            "binary randomized response bound needs d = 2"
        );
    }

    #[test]
    fn inversion_reference_points() {
        let e = invert_amplification(MechanismTag::Solh, 0.2121, 1_000_001, 51, 1e-9).unwrap();
        assert!((e - 100f64.ln()).abs() < 2e-3, "{e}");
        match invert_amplification(MechanismTag::Grr, 0.2, KOSARAK_N, 915, 1e-9) {
            Err(Error::Infeasible {
                min_n: Some(min_n), ..
            }) => {
                assert!(
                    invert_amplification(MechanismTag::Grr, 0.2, min_n as usize, 915, 1e-9).is_ok()
                );
                assert!(invert_amplification(
                    MechanismTag::Grr,
                    0.2,
                    min_n as usize - 1,
                    915,
                    1e-9
                )
                .is_err());
            }
            other => panic!("expected infeasible with min_n, got {other:?}"),
        }
    }

    #[test]
    fn variance_reference_points() {
        let v = var_grr(0.2, KOSARAK_N, 50, 1e-9).unwrap().variance;
        assert!(close(v, 1.97e-8, 0.01), "{v}");
        assert!(var_grr(0.2, KOSARAK_N, 915, 1e-9).is_err());
        let m = blanket_size(0.2, KOSARAK_N, 1e-9);
        assert!((m - 132.08).abs() < 0.01, "{m}");
        let mu = unary_blanket_size(0.2, KOSARAK_N, 1e-9);
        assert!((mu - 31.98).abs() < 0.01, "{mu}");
        let u = var_ue(0.2, KOSARAK_N, 1e-9).unwrap().variance;
        assert!(close(u, 3.48e-8, 0.01), "{u}");
        let s10 = var_solh(0.2, KOSARAK_N, 10, 1e-9).unwrap().variance;
        assert!(close(s10, 1.31e-7, 0.01), "{s10}");
        // unary encoding beats SOLH here, at 80x the communication
        let s45 = var_solh(0.2, KOSARAK_N, 45, 1e-9).unwrap().variance;
        assert!(close(s45, 5.27e-8, 0.02), "{s45}");
        assert!(u < s45);
    }

    #[test]
    fn grr_variance_decreases_in_n() {
        let mut last = f64::INFINITY;
        for n in [200_000, 400_000, 800_000, 1_600_000] {
            let v = var_grr(0.3, n, 20, 1e-9).unwrap().variance;
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn peos_reference_points() {
        let e = peos_eps(
            MechanismTag::Solh,
            0.0f64.max((150.0f64 - 44.0).ln()),
            KOSARAK_N,
            100_000,
            45,
            1e-9,
        )
        .unwrap();
        assert!((e.epsilon_s - 0.3673).abs() < 5e-5, "{}", e.epsilon_s);
        assert!((e.epsilon_c - 0.1844).abs() < 5e-5, "{}", e.epsilon_c);
        let none = peos_eps(MechanismTag::Solh, 2.0, KOSARAK_N, 0, 45, 1e-9).unwrap();
        assert!(none.epsilon_s.is_infinite());
        let plain = amplify(MechanismTag::Solh, 2.0, KOSARAK_N, 45, 1e-9).unwrap();
        assert!((none.epsilon_c - plain.epsilon_c).abs() < 1e-12);
    }

    #[test]
    fn peos_variance_inflation() {
        let base = peos_var(MechanismTag::Solh, 2.0, 900_000, 0, 30, 1e-9)
            .unwrap()
            .variance;
        let shuffled_base = {
            // base variance with n + n_r reports
            let cfg = crate::mechanisms::SolhConfig::new(2.0, 100, 30).unwrap();
            cfg.variance(1_000_000, 0.0)
        };
        let with = peos_var(MechanismTag::Solh, 2.0, 900_000, 100_000, 30, 1e-9)
            .unwrap()
            .variance;
        assert!((with / shuffled_base - (10.0f64 / 9.0).powi(2)).abs() < 1e-9);
        assert!(
            (base
                - crate::mechanisms::SolhConfig::new(2.0, 100, 30)
                    .unwrap()
                    .variance(900_000, 0.0))
            .abs()
                < 1e-18
        );
    }

    #[test]
    fn optimal_dprime_reference_points() {
        assert!((optimal_dprime(0.2, KOSARAK_N, 1e-9).unwrap() as i64 - 45).abs() <= 1);
        assert!((optimal_dprime(0.8, KOSARAK_N, 1e-9).unwrap() as i64 - 705).abs() <= 1);
        assert!(optimal_dprime(0.01, KOSARAK_N, 1e-9).is_err());
    }

    #[test]
    fn peos_optimal_dprime_degenerates_without_fakes() {
        for eps in [0.2, 0.4, 0.8] {
            assert_eq!(
                peos_optimal_dprime(eps, KOSARAK_N, 0, 1e-9).unwrap(),
                optimal_dprime(eps, KOSARAK_N, 1e-9).unwrap()
            );
        }
    }
}
