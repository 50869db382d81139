use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use shuffledp::mechanisms::{FrequencyVector, MechanismTag};
use shuffledp::rng::stream;
use shuffledp::treehist::*;

/// `n` 16-bit values: `planted.len()` heavy values with Zipf weights holding
/// 80% of the mass, the rest uniform.
fn planted(n: usize, seed: u64) -> (Vec<u64>, Vec<u64>) {
    let mut rng = stream(seed, "planted");
    let mut heavy: Vec<u64> = Vec::new();
    while heavy.len() < 20 {
        let v = rng.gen_range(0..1u64 << 16);
        if !heavy.contains(&v) {
            heavy.push(v);
        }
    }
    let w: Vec<f64> = (1..=20).map(|k| (k as f64).powf(-1.1)).collect();
    let total: f64 = w.iter().sum();
    let heavy_n = n * 4 / 5;
    let mut values = Vec::with_capacity(n);
    for (i, &h) in heavy.iter().enumerate() {
        let c = if i + 1 == heavy.len() {
            heavy_n - values.len()
        } else {
            (heavy_n as f64 * w[i] / total).round() as usize
        };
        values.extend(std::iter::repeat_n(h, c));
    }
    while values.len() < n {
        values.push(rng.gen_range(0..1u64 << 16));
    }
    values.shuffle(&mut rng);
    (values, heavy)
}

#[test]
fn one_round_is_plain_frequency_estimation() {
    let mut rng = stream(1, "one-round");
    let values: Vec<u64> = (0..4000).map(|_| rng.gen_range(0..16u64)).collect();
    let mut cfg = TreeHistConfig::new(4, 4, 16, 60.0, 1e-9).unwrap();
    cfg.mode = TreeHistMode::Ldp;
    cfg.estimator = MechanismTag::Grr;
    let res = treehist_run(&values, &cfg, &mut rng).unwrap();
    assert_eq!(res.rounds.len(), 1);
    assert_eq!(res.rounds[0].domain_size, 17);
    assert!(!res.short);
    let truth =
        FrequencyVector::histogram(&values.iter().map(|&v| v as usize).collect::<Vec<_>>(), 16);
    assert_eq!(res.heavy_hitters.len(), 16);
    for c in &res.heavy_hitters {
        assert!((c.estimate - truth[c.prefix as usize]).abs() < 1e-9);
    }
}

#[test]
fn returned_strings_descend_from_retained_prefixes() {
    let (values, _) = planted(20_000, 2);
    for mode in [
        TreeHistMode::Shuffler,
        TreeHistMode::Ldp,
        TreeHistMode::NonInteractive,
    ] {
        let mut cfg = TreeHistConfig::new(16, 4, 10, 2.0, 1e-9).unwrap();
        cfg.mode = mode;
        let res = treehist_run(&values, &cfg, &mut stream(3, "tree")).unwrap();
        assert_eq!(res.rounds.len(), 4);
        for hh in &res.heavy_hitters {
            for (j, round) in res.rounds.iter().enumerate() {
                let p = hh.prefix >> (16 - 4 * (j as u32 + 1));
                assert!(
                    round.retained.iter().any(|c| c.prefix == p),
                    "{mode:?}: {:#x} level {}",
                    hh.prefix,
                    j + 1
                );
            }
        }
    }
}

#[test]
fn ldp_mode_uses_disjoint_equal_groups() {
    let (values, _) = planted(10_003, 4);
    let mut cfg = TreeHistConfig::new(16, 4, 8, 4.0, 1e-9).unwrap();
    cfg.mode = TreeHistMode::Ldp;
    let res = treehist_run(&values, &cfg, &mut stream(4, "ldp")).unwrap();
    assert!(res
        .rounds
        .iter()
        .all(|r| r.users == 10_003 / 4 && r.local_epsilon == 4.0));
}

#[test]
fn shuffler_mode_splits_the_budget() {
    let (values, _) = planted(10_000, 5);
    let cfg = TreeHistConfig::new(16, 8, 8, 1.0, 1e-9).unwrap();
    let res = treehist_run(&values, &cfg, &mut stream(5, "split")).unwrap();
    assert_eq!(res.rounds.iter().map(|r| r.epsilon).sum::<f64>(), 1.0);
    assert_eq!(res.rounds.iter().map(|r| r.delta).sum::<f64>(), 1e-9);
    assert!(res.rounds.iter().all(|r| r.users == 10_000));
}

#[test]
fn more_candidates_than_exist_is_flagged() {
    let values = vec![3u64; 50];
    let mut cfg = TreeHistConfig::new(2, 2, 10, 60.0, 1e-9).unwrap();
    cfg.mode = TreeHistMode::Ldp;
    cfg.estimator = MechanismTag::Grr;
    let res = treehist_run(&values, &cfg, &mut stream(6, "short")).unwrap();
    assert!(res.short);
    assert_eq!(res.heavy_hitters.len(), 4);
    assert_eq!(res.heavy_hitters[0].prefix, 3);
}

#[test]
fn recovery_degrades_monotonically_with_budget() {
    let (values, heavy) = planted(20_000, 7);
    let medians: Vec<f64> = [4.0, 1.0, 0.25, 0.05]
        .iter()
        .map(|&eps| {
            let mut f1: Vec<f64> = (0..9u64)
                .into_par_iter()
                .map(|s| {
                    let cfg = TreeHistConfig::new(16, 8, 20, eps, 1e-9).unwrap();
                    let res = treehist_run(&values, &cfg, &mut stream(s, "mono")).unwrap();
                    let found: Vec<u64> = res.heavy_hitters.iter().map(|c| c.prefix).collect();
                    f1_score(&found, &heavy)
                })
                .collect();
            f1.sort_by(f64::total_cmp);
            f1[4]
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[0] >= w[1]), "{medians:?}");
    assert!(medians[0] > medians[3], "{medians:?}");
}
