//! Fixtures shared by the criterion benches.

use noisy_sort::rng::{stream, StreamRole};
use noisy_sort::{sample_uniform_permutation, ComparisonOracle, CrossoverProb, SearchOracle};

/// Comparison oracle over a uniform permutation of `n` items.
pub fn comparison_oracle(n: usize, p: f64, seed: u64) -> ComparisonOracle {
    let truth = sample_uniform_permutation(n, &mut stream(seed, 0, StreamRole::Truth));
    ComparisonOracle::new(
        truth,
        CrossoverProb::new(p).expect("p in [0, 1/2)"),
        stream(seed, 0, StreamRole::Noise),
    )
}

/// Search oracle whose target is the middle interval.
pub fn search_oracle(n_intervals: usize, p: f64, seed: u64) -> SearchOracle {
    let p = CrossoverProb::new(p).expect("p in [0, 1/2)");
    SearchOracle::new(
        n_intervals,
        n_intervals.div_ceil(2),
        p,
        stream(seed, 0, StreamRole::Noise),
    )
    .expect("at least two intervals")
}
