use proptest::prelude::*;
use shuffledp::amplification::*;
use shuffledp::mechanisms::MechanismTag;
use shuffledp::Error;

struct OraclePoint {
    eps_l: f64,
    eps_c: f64,
    n: usize,
    k: usize,
    delta: f64,
    n_r: usize,
    amplify_k: f64,
    amplify_ue: f64,
    var_grr: f64,
    var_ue: f64,
    var_solh: f64,
    invert_k: f64,
    peos_eps_s: f64,
    peos_eps_c: f64,
    small_budget: f64,
    binary_rr: f64,
}

#[allow(clippy::unreadable_literal, clippy::excessive_precision)]
const ORACLE: [OraclePoint; 20] = include!("amplification_oracle_values.in");

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn formulas_match_high_precision_oracle() {
    for p in &ORACLE {
        let tol = 1e-12;
        for tag in [MechanismTag::Grr, MechanismTag::Solh] {
            let a = amplify(tag, p.eps_l, p.n, p.k, p.delta).unwrap().epsilon_c;
            assert!(rel(a, p.amplify_k) < tol, "{tag}: {a} vs {}", p.amplify_k);
        }
        let ue = amplify(MechanismTag::Ue, p.eps_l, p.n, 0, p.delta)
            .unwrap()
            .epsilon_c;
        assert!(rel(ue, p.amplify_ue) < tol);
        match var_grr(p.eps_c, p.n, p.k, p.delta) {
            Ok(v) => assert!(rel(v.variance, p.var_grr) < 1e-10),
            Err(_) => assert!(p.var_grr.is_nan()),
        }
        match var_ue(p.eps_c, p.n, p.delta) {
            Ok(v) => assert!(rel(v.variance, p.var_ue) < 1e-10),
            Err(_) => assert!(p.var_ue.is_nan()),
        }
        match var_solh(p.eps_c, p.n, p.k as u32, p.delta) {
            Ok(v) => assert!(rel(v.variance, p.var_solh) < 1e-10),
            Err(_) => assert!(p.var_solh.is_nan()),
        }
        match invert_amplification(MechanismTag::Solh, p.eps_c, p.n, p.k, p.delta) {
            Ok(e) => assert!(rel(e, p.invert_k) < 1e-10),
            Err(_) => assert!(p.invert_k.is_nan()),
        }
        let pe = peos_eps(MechanismTag::Solh, p.eps_l, p.n, p.n_r, p.k, p.delta).unwrap();
        assert!(rel(pe.epsilon_s, p.peos_eps_s) < tol);
        assert!(rel(pe.epsilon_c, p.peos_eps_c) < tol);
        let t1 = amplify_prior_bound(PriorBound::SmallBudget, p.eps_l, p.n, p.k, p.delta).unwrap();
        assert!(rel(t1.epsilon_c, p.small_budget) < tol);
        let t2 = amplify_prior_bound(PriorBound::BinaryRr, p.eps_l, p.n, 2, p.delta).unwrap();
        assert!(rel(t2.epsilon_c, p.binary_rr) < tol);
    }
}

const KOSARAK_N: usize = 990_002;

#[test]
fn kosarak_hash_ranges_and_variances() {
    let want_d = [45, 177, 397, 705];
    let want_v = [5.27e-8, 1.30e-8, 5.76e-9, 3.24e-9];
    for (i, eps) in [0.2, 0.4, 0.6, 0.8].into_iter().enumerate() {
        let d = optimal_dprime(eps, KOSARAK_N, 1e-9).unwrap();
        assert!((d as i64 - want_d[i]).abs() <= 1, "eps {eps}: d' = {d}");
        let v = var_solh(eps, KOSARAK_N, d, 1e-9).unwrap().variance;
        assert!(rel(v, want_v[i]) < 0.02, "eps {eps}: {v}");
    }
}

#[test]
fn optimal_dprime_is_exhaustive_argmin_for_small_m() {
    // choose eps_c so that m sweeps 4..=500
    let n = 1_000_001;
    let a = 14.0 * (2.0f64 / 1e-6).ln();
    for m in (4..=500).step_by(7) {
        let eps = (m as f64 * a / (n as f64 - 1.0)).sqrt();
        let got = optimal_dprime(eps, n, 1e-6).unwrap();
        let mf = blanket_size(eps, n, 1e-6);
        let best = (2..(mf.ceil() as u32))
            .filter(|&k| (k as f64) < mf)
            .min_by(|&x, &y| {
                solh_variance_at(mf, n, x as f64).total_cmp(&solh_variance_at(mf, n, y as f64))
            })
            .unwrap();
        assert_eq!(
            solh_variance_at(mf, n, got as f64),
            solh_variance_at(mf, n, best as f64),
            "m = {mf}: got {got}, best {best}"
        );
    }
}

#[test]
fn unimodal_solh_variance() {
    let n = 100_000;
    for m in [4.5, 10.0, 57.3, 250.0, 499.0] {
        let vals: Vec<f64> = (2..(m as u32))
            .map(|k| solh_variance_at(m, n, k as f64))
            .collect();
        let argmin = vals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!(vals[..=argmin].windows(2).all(|w| w[0] >= w[1]));
        assert!(vals[argmin..].windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn peos_dprime_against_closed_form_and_local_optimality() {
    let (n, n_r, delta) = (KOSARAK_N, 100_000, 1e-9);
    let eps = 0.4;
    let d = peos_optimal_dprime(eps, n, n_r, delta).unwrap();
    let v = |k: u32| {
        peos_var_at_eps_c(MechanismTag::Solh, eps, n, n_r, k as usize, delta).map(|v| v.variance)
    };
    let here = v(d).unwrap();
    assert!(v(d - 1).map_or(true, |x| x >= here));
    assert!(v(d + 1).map_or(true, |x| x >= here));
    let closed = peos_dprime_closed_form(eps, n, n_r, delta);
    assert!(
        (d as f64 - closed).abs() <= 1.0,
        "integer search {d}, closed form {closed}"
    );
    // fakes shrink the required user blanket, so the best range grows past the no-fake optimum
    assert!(d >= optimal_dprime(eps, n, delta).unwrap());
}

#[test]
fn planner_without_constraints_never_loses_to_plain_amplification() {
    let t = PlanTargets {
        eps_server: 0.5,
        eps_users: f64::INFINITY,
        eps_aux: f64::INFINITY,
    };
    let plan = plan_parameters(t, 100_000, 1000, 1e-9).unwrap();
    assert!(plan.achieved.epsilon_c <= 0.5);
    let direct = var_solh(
        0.5,
        100_000,
        optimal_dprime(0.5, 100_000, 1e-9).unwrap(),
        1e-9,
    )
    .unwrap();
    assert!(
        plan.variance <= direct.variance,
        "{} vs {}",
        plan.variance,
        direct.variance
    );
    // with a tiny domain the fake-free point is optimal
    let small = plan_parameters(t, 100_000, 2, 1e-9).unwrap();
    let plain = var_grr(0.5, 100_000, 2, 1e-9).unwrap().variance;
    assert!(small.variance <= plain * (1.0 + 1e-9));
}

#[test]
fn planner_reports_binding_constraint() {
    let t = PlanTargets {
        eps_server: 0.5,
        eps_users: 1e-7,
        eps_aux: 1.0,
    };
    match plan_parameters(t, 1000, 10, 1e-9) {
        Err(Error::Infeasible { reason, .. }) => {
            assert!(reason.contains("binding constraint: eps_users"), "{reason}")
        }
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn planner_is_deterministic() {
    let t = PlanTargets {
        eps_server: 0.3,
        eps_users: 1.0,
        eps_aux: 4.0,
    };
    assert_eq!(
        plan_parameters(t, 200_000, 300, 1e-9).unwrap(),
        plan_parameters(t, 200_000, 300, 1e-9).unwrap()
    );
}

fn tag_strategy() -> impl Strategy<Value = MechanismTag> {
    prop_oneof![
        Just(MechanismTag::Grr),
        Just(MechanismTag::Solh),
        Just(MechanismTag::Ue)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn amplification_increases_in_eps_and_decreases_in_n(
        tag in tag_strategy(), e in 0.1f64..8.0, de in 0.01f64..2.0, n in 1000usize..10_000_000, k in 2usize..500,
    ) {
        let a = amplify(tag, e, n, k, 1e-9).unwrap().epsilon_c;
        prop_assert!(amplify(tag, e + de, n, k, 1e-9).unwrap().epsilon_c > a);
        prop_assert!(amplify(tag, e, n + 1000, k, 1e-9).unwrap().epsilon_c < a);
    }

    #[test]
    fn amplify_and_invert_are_inverses(
        tag in tag_strategy(), e in 0.1f64..8.0, n in 1000usize..10_000_000, k in 2usize..500,
    ) {
        let c = amplify(tag, e, n, k, 1e-9).unwrap().epsilon_c;
        if let Ok(back) = invert_amplification(tag, c, n, k, 1e-9) {
            prop_assert!(((back - e) / e).abs() < 1e-10, "{} vs {}", back, e);
        }
    }

    #[test]
    fn fakes_never_weaken_guarantees(
        e in 0.1f64..8.0, n in 1000usize..1_000_000, k in 2usize..500, n_r in 0usize..200_000,
    ) {
        let pe = peos_eps(MechanismTag::Solh, e, n, n_r, k, 1e-9).unwrap();
        let plain = amplify(MechanismTag::Solh, e, n, k, 1e-9).unwrap().epsilon_c;
        prop_assert!(pe.epsilon_c <= plain * (1.0 + 1e-12));
        prop_assert!(pe.epsilon_c <= pe.epsilon_s * (1.0 + 1e-12));
    }

    #[test]
    fn optimal_dprime_is_a_local_minimum(eps in 0.05f64..2.0, n in 10_000usize..5_000_000) {
        if let Ok(d) = optimal_dprime(eps, n, 1e-9) {
            let m = blanket_size(eps, n, 1e-9);
            let v = |k: f64| solh_variance_at(m, n, k);
            prop_assert!(d >= 2 && (d as f64) < m);
            if d > 2 { prop_assert!(v(d as f64) <= v(d as f64 - 1.0)); }
            if ((d + 1) as f64) < m { prop_assert!(v(d as f64) <= v(d as f64 + 1.0)); }
        }
    }
}
