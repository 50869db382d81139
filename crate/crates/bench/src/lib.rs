//! Shared fixtures for the benchmarks.

use rand::Rng;
use shuffledp::rng::stream;

/// `n` values over `0..d` with a geometric skew, reproducible from `seed`.
pub fn skewed_values(n: usize, d: usize, seed: u64) -> Vec<usize> {
    let mut rng = stream(seed, "bench/values");
    (0..n)
        .map(|_| {
            let mut v = 0;
            while v + 1 < d && rng.gen_bool(0.5) {
                v += 1;
            }
            v
        })
        .collect()
}
