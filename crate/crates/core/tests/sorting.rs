use noisy_sort::harness::{run_experiment, Algorithm, ExperimentConfig, TruthSource};
use noisy_sort::info::{binary_entropy, feige_rate_optimizer, CrossoverProb};
use noisy_sort::rng::{stream, StreamRole};
use noisy_sort::{sort_fixed, AggregateResult, ComparisonOracle, Permutation};

fn cp(p: f64) -> CrossoverProb {
    CrossoverProb::new(p).unwrap()
}

fn run(
    algorithm: Algorithm,
    n: usize,
    p: f64,
    param: f64,
    delta: Option<f64>,
    trials: u64,
    seed: u64,
) -> AggregateResult {
    run_experiment(&ExperimentConfig {
        algorithm,
        n,
        p: cp(p),
        param,
        delta,
        trials,
        master_seed: seed,
        truth: TruthSource::Uniform,
    })
    .unwrap()
}

#[test]
fn tree_sorter_at_backed_off_optimal_rate() {
    let best = feige_rate_optimizer(cp(0.1), 1000).unwrap();
    let params = best.best.unwrap();
    let rate = 0.9 * best.rate;
    let r = run(Algorithm::Nst, 256, 0.1, rate, Some(params.delta), 500, 31);
    println!(
        "tree sorter n=256 p=0.1 R={rate:.4} delta={:.4} beta={}: error {:.4}, empirical rate {:.4}",
        params.delta, params.beta, r.error_rate, r.empirical_rate
    );
    assert!(r.error_rate < 0.1);
}

#[test]
fn tree_sorter_rate_below_fixed_length_rate() {
    let best = feige_rate_optimizer(cp(0.1), 1000).unwrap();
    let params = best.best.unwrap();
    let nst = run(
        Algorithm::Nst,
        256,
        0.1,
        0.9 * best.rate,
        Some(params.delta),
        200,
        32,
    );
    let fixed = run(Algorithm::FixedBz, 256, 0.1, 0.1, None, 200, 32);
    println!(
        "n=256 p=0.1: tree rate {:.4} (error {:.3}), fixed rate {:.4} (error {:.3})",
        nst.empirical_rate, nst.error_rate, fixed.empirical_rate, fixed.error_rate
    );
    assert!(nst.error_rate < 0.1 && fixed.error_rate < 0.1);
    assert!(nst.empirical_rate < fixed.empirical_rate);
}

#[test]
fn fixed_length_reliability_does_not_degrade_with_n() {
    let trials = 300;
    let rates: Vec<(usize, f64, f64)> = [32usize, 128, 512]
        .into_iter()
        .map(|n| {
            let r = run(Algorithm::FixedBz, n, 0.1, 0.12, None, trials, 33);
            (n, r.error_rate, r.error_stderr)
        })
        .collect();
    for w in rates.windows(2) {
        let ((n0, e0, s0), (n1, e1, s1)) = (w[0], w[1]);
        let slack = 3.0 * (s0 * s0 + s1 * s1).sqrt().max(1.0 / trials as f64);
        assert!(
            e1 <= e0 + slack,
            "error rose from {e0} (n={n0}) to {e1} (n={n1})"
        );
    }
}

#[test]
fn variable_length_rate_trend() {
    let half_capacity = 0.5 * (1.0 - binary_entropy(0.1).unwrap());
    for (n, trials) in [(64usize, 200u64), (256, 50), (1024, 10)] {
        let pe = 1.0 / (n as f64).log2();
        let r = run(Algorithm::VariableBz, n, 0.1, pe, None, trials, 34);
        println!(
            "variable-length n={n}: rate {:.4} ({:.1}% of {half_capacity:.4}), error {:.3}",
            r.empirical_rate,
            100.0 * r.empirical_rate / half_capacity,
            r.error_rate
        );
        // finite-n rates sit above the asymptotic value and fall toward it
        assert!(r.empirical_rate > 0.8 * half_capacity);
    }
}

#[test]
fn noiseless_fixed_sort_within_budget() {
    let truth = Permutation::reversed(16);
    let mut o = ComparisonOracle::new(truth.clone(), cp(0.0), stream(35, 0, StreamRole::Noise));
    let out = sort_fixed(&mut o, 1.0, &mut stream(35, 0, StreamRole::Query)).unwrap();
    assert_eq!(out.pi_hat, truth);
    assert!(out.total_queries <= 64);
}

#[test]
fn noiseless_experiment_has_zero_error() {
    for (alg, param, delta) in [
        (Algorithm::FixedBz, 1.0, None),
        (Algorithm::VariableBz, 0.05, None),
        (Algorithm::Nst, 0.3, Some(0.01)),
    ] {
        let r = run(alg, 64, 0.0, param, delta, 50, 36);
        assert_eq!(r.errors, 0);
    }
}
