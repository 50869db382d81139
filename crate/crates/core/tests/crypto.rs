use proptest::prelude::*;
use rand::Rng;
use shuffledp::crypto::*;
use shuffledp::protocol::chi_square_uniform;
use shuffledp::rng::stream;

#[test]
fn single_shares_are_uniform() {
    let ring = Ring::new(64).unwrap();
    let mut rng = stream(8, "share-uniformity");
    let mut buckets = [[0u64; 16]; 3];
    for _ in 0..100_000 {
        let v: u64 = rng.gen_range(0..4);
        let sv = share(v, 3, ring, &mut rng).unwrap();
        for (b, s) in buckets.iter_mut().zip(&sv.shares) {
            b[(s >> 60) as usize] += 1;
        }
    }
    for b in &buckets {
        let (_, p) = chi_square_uniform(b);
        assert!(p > 0.01, "p = {p} {b:?}");
    }
}

#[test]
fn round_trip_ten_thousand_values() {
    let mut rng = stream(12, "share-round-trip");
    for bits in [8, 32, 64] {
        let ring = Ring::new(bits).unwrap();
        for _ in 0..10_000 {
            let v = ring.random(&mut rng);
            let r = rng.gen_range(2..8);
            assert_eq!(
                reconstruct(&share(v, r, ring, &mut rng).unwrap()).unwrap(),
                v
            );
        }
    }
}

fn test_key(ring: Ring) -> (PaillierPublicKey, PaillierSecretKey) {
    paillier_keygen(512, ring, &mut stream(13, "paillier-test-key")).unwrap()
}

#[test]
fn paillier_sums_of_seven_shares() {
    let ring = Ring::new(64).unwrap();
    let (pk, sk) = test_key(ring);
    let mut rng = stream(14, "ahe-sums");
    for _ in 0..1000 {
        let vals: Vec<u64> = (0..7).map(|_| ring.random(&mut rng)).collect();
        let mut acc = pk.encrypt(vals[0], &mut rng).unwrap();
        for &v in &vals[1..] {
            acc = pk.add(&acc, &pk.encrypt(v, &mut rng).unwrap()).unwrap();
        }
        let want = vals.iter().fold(0u64, |a, &v| ring.add(a, v));
        assert_eq!(pk.decrypt(&sk, &acc).unwrap(), want);
        assert_eq!(pk.additions(&acc), 7);
    }
}

#[test]
fn paillier_wraparound_and_zero() {
    for bits in [32, 64] {
        let ring = Ring::new(bits).unwrap();
        let (pk, sk) = test_key(ring);
        let mut rng = stream(15, "wrap");
        let z = pk
            .add(
                &pk.encrypt(0, &mut rng).unwrap(),
                &pk.encrypt(0, &mut rng).unwrap(),
            )
            .unwrap();
        assert_eq!(pk.decrypt(&sk, &z).unwrap(), 0);
        let top = pk.encrypt(ring.mask(), &mut rng).unwrap();
        let w = pk.add(&top, &pk.encrypt(1, &mut rng).unwrap()).unwrap();
        assert_eq!(pk.decrypt(&sk, &w).unwrap(), 0);
    }
}

fn check_split<S: Ahe>(scheme: &S, sk: &S::SecretKey, trials: usize, seed: u64) {
    let ring = scheme.ring();
    let mut rng = stream(seed, "split");
    for t in [2, 3, 4] {
        for _ in 0..trials {
            let v = ring.random(&mut rng);
            let c = scheme.encrypt(v, &mut rng).unwrap();
            let (plain, cs) = ahe_split(scheme, &c, t, &mut rng).unwrap();
            assert_eq!(plain.len(), t - 1);
            let total = plain
                .iter()
                .fold(scheme.decrypt(sk, &cs).unwrap(), |a, &s| ring.add(a, s));
            assert_eq!(total, v);
        }
    }
}

#[test]
fn split_reconstructs_with_paillier() {
    let ring = Ring::new(64).unwrap();
    let (pk, sk) = test_key(ring);
    check_split(&pk, &sk, 1000, 16);
}

#[test]
fn split_reconstructs_with_identity_double() {
    check_split(&IdentityAhe::new(Ring::new(64).unwrap()), &(), 1000, 17);
}

#[test]
fn split_with_forced_zero_share() {
    let ring = Ring::new(64).unwrap();
    let (pk, sk) = test_key(ring);
    let mut rng = stream(18, "forced");
    let c = pk.encrypt(123_456, &mut rng).unwrap();
    let cs = split_with(&pk, &c, &[0], &mut rng).unwrap();
    assert_eq!(pk.decrypt(&sk, &cs).unwrap(), 123_456);
}

#[test]
fn split_plaintext_shares_are_uniform() {
    let scheme = IdentityAhe::new(Ring::new(64).unwrap());
    let mut rng = stream(19, "split-uniform");
    let c = scheme.encrypt(42, &mut rng).unwrap();
    let mut counts = [0u64; 16];
    for _ in 0..100_000 {
        let (plain, _) = ahe_split(&scheme, &c, 2, &mut rng).unwrap();
        counts[(plain[0] >> 60) as usize] += 1;
    }
    assert!(chi_square_uniform(&counts).1 > 0.01);
}

#[test]
fn onion_layers_carry_a_protocol_report() {
    let mut rng = stream(20, "onion");
    let keys: Vec<OnionKeyPair> = (0..4).map(|_| OnionKeyPair::generate(&mut rng)).collect();
    let pubs: Vec<_> = keys.iter().map(OnionKeyPair::public).collect();
    let report = 0xdead_beef_0123_4567u64.to_be_bytes();
    let mut env = onion_encrypt(&report, &pubs, &mut rng).unwrap();
    for (layer, k) in keys.iter().enumerate() {
        match onion_peel(k, &env, layer).unwrap() {
            Peeled::Envelope(next) => env = next,
            Peeled::Payload(p) => {
                assert_eq!(layer, 3);
                assert_eq!(p, report);
                return;
            }
        }
    }
    panic!("payload never reached");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn homomorphic_addition_is_commutative_and_associative(a: u64, b: u64, c: u64, seed: u64) {
        let scheme = IdentityAhe::new(Ring::new(64).unwrap());
        let mut rng = stream(seed, "assoc");
        let (ea, eb, ec) = (
            scheme.encrypt(a, &mut rng).unwrap(),
            scheme.encrypt(b, &mut rng).unwrap(),
            scheme.encrypt(c, &mut rng).unwrap(),
        );
        let l = scheme.add(&scheme.add(&ea, &eb).unwrap(), &ec).unwrap();
        let r = scheme.add(&ea, &scheme.add(&ec, &eb).unwrap()).unwrap();
        prop_assert_eq!(scheme.decrypt(&(), &l).unwrap(), scheme.decrypt(&(), &r).unwrap());
    }

    #[test]
    fn sharing_round_trips(v: u64, r in 2usize..12, bits in 1u32..=64, seed: u64) {
        let ring = Ring::new(bits).unwrap();
        let v = ring.reduce(v);
        let sv = share(v, r, ring, &mut stream(seed, "prop-share")).unwrap();
        prop_assert!(sv.shares.iter().all(|&s| ring.contains(s)));
        prop_assert_eq!(reconstruct(&sv).unwrap(), v);
    }
}
