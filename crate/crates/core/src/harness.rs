//! Seeded Monte Carlo runner, CSV output and the self-check suite.

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::info::{binary_entropy, g_of_p, rate_bounds_with_grid, CrossoverProb, RatePoint};
use crate::oracle::{
    lehmer_decode, lehmer_encode, map_back, sample_uniform_permutation, ComparisonOracle,
    Permutation, SearchOracle,
};
use crate::posterior::{
    choose_query_variable, exact_bayes_oracle, expected_improvement, PosteriorState,
};
use crate::rng::{stream, StreamRole};
use crate::search::bz_fixed;
use crate::sorter::{sort_fixed, sort_nst, sort_variable, SortOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    FixedBz,
    VariableBz,
    Nst,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::FixedBz => "fixed",
            Algorithm::VariableBz => "variable",
            Algorithm::Nst => "nst",
        }
    }
}

/// Where each trial's hidden order comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TruthSource {
    /// Fresh uniform permutation per trial.
    Uniform,
    /// The same permutation every trial, hidden behind a fresh uniform
    /// relabeling of the items.
    Relabeled(Permutation),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub n: usize,
    pub p: CrossoverProb,
    /// Rate `R` for the fixed and tree codes, overall `pe` for the variable code.
    pub param: f64,
    pub delta: Option<f64>,
    pub trials: u64,
    pub master_seed: u64,
    pub truth: TruthSource,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if let TruthSource::Relabeled(t) = &self.truth {
            if t.len() != self.n {
                return Err(Error::SizeMismatch(t.len(), self.n));
            }
        }
        if self.algorithm == Algorithm::Nst && self.delta.is_none() {
            return Err(Error::Config("the nst algorithm needs delta".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialResult {
    pub correct: bool,
    pub queries: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub trials: u64,
    pub errors: u64,
    pub error_rate: f64,
    /// Binomial standard error of `error_rate`.
    pub error_stderr: f64,
    pub mean_queries: f64,
    pub stderr_queries: f64,
    /// `n log2 n / mean_queries`; NaN when no queries were made.
    pub empirical_rate: f64,
    pub wall_time_ms: u64,
}

fn sort_once<R: Rng + ?Sized>(
    config: &ExperimentConfig,
    oracle: &mut ComparisonOracle,
    rng: &mut R,
) -> Result<SortOutcome> {
    match config.algorithm {
        Algorithm::FixedBz => sort_fixed(oracle, config.param, rng),
        Algorithm::VariableBz => sort_variable(oracle, config.param, rng),
        Algorithm::Nst => sort_nst(oracle, config.param, config.delta.unwrap_or(f64::NAN)),
    }
}

/// One trial, fully determined by `(config.master_seed, trial)`.
pub fn run_trial(config: &ExperimentConfig, trial: u64) -> Result<TrialResult> {
    let seed = config.master_seed;
    let noise = stream(seed, trial, StreamRole::Noise);
    let mut query_rng = stream(seed, trial, StreamRole::Query);
    let (truth, outcome) = match &config.truth {
        TruthSource::Uniform => {
            let truth =
                sample_uniform_permutation(config.n, &mut stream(seed, trial, StreamRole::Truth));
            let mut oracle = ComparisonOracle::new(truth.clone(), config.p, noise);
            (truth, sort_once(config, &mut oracle, &mut query_rng)?)
        }
        TruthSource::Relabeled(truth) => {
            let oracle = ComparisonOracle::new(truth.clone(), config.p, noise);
            let (mut oracle, relabel) =
                oracle.randomize_labels(&mut stream(seed, trial, StreamRole::Relabel));
            let mut out = sort_once(config, &mut oracle, &mut query_rng)?;
            out.pi_hat = map_back(&out.pi_hat, &relabel);
            (truth.clone(), out)
        }
    };
    Ok(TrialResult {
        correct: outcome.pi_hat == truth,
        queries: outcome.total_queries,
    })
}

/// Deterministic reduction of per-trial results, in trial order.
pub fn aggregate(n: usize, results: &[TrialResult]) -> AggregateResult {
    let trials = results.len() as u64;
    let errors = results.iter().filter(|r| !r.correct).count() as u64;
    let sum: u128 = results.iter().map(|r| r.queries as u128).sum();
    let sum_sq: u128 = results.iter().map(|r| (r.queries as u128).pow(2)).sum();
    let t = trials as f64;
    let mean = sum as f64 / t;
    let var = if trials > 1 {
        // exact integer numerator: T * sum_sq - sum^2
        let num = (trials as u128 * sum_sq - sum * sum) as f64;
        num / (t * (t - 1.0))
    } else {
        0.0
    };
    let error_rate = errors as f64 / t;
    let nf = n as f64;
    AggregateResult {
        trials,
        errors,
        error_rate,
        error_stderr: (error_rate * (1.0 - error_rate) / t).sqrt(),
        mean_queries: mean,
        stderr_queries: (var / t).sqrt(),
        empirical_rate: if mean > 0.0 {
            nf * nf.log2() / mean
        } else {
            f64::NAN
        },
        wall_time_ms: 0,
    }
}

/// Runs all trials in parallel and reduces them in trial order, so results do
/// not depend on the number of worker threads.
pub fn run_experiment(config: &ExperimentConfig) -> Result<AggregateResult> {
    config.validate()?;
    let started = Instant::now();
    let results = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, t))
        .collect::<Result<Vec<_>>>()?;
    let mut agg = aggregate(config.n, &results);
    agg.wall_time_ms = started.elapsed().as_millis() as u64;
    Ok(agg)
}

pub const RATES_HEADER: &str = "p,feige_rate,bz_fixed_rate,vl_rate,ins_converse,capacity_upper";
pub const SORT_SIM_HEADER: &str =
    "alg,n,p,param,trials,errors,error_rate,mean_queries,stderr_queries,empirical_rate,seed";

pub fn rate_row(point: &RatePoint) -> String {
    let mut row = format!("{:.6}", point.p.get());
    for v in point.as_array() {
        row.push_str(&format!(",{v:.6}"));
    }
    row
}

pub fn sort_sim_row(config: &ExperimentConfig, result: &AggregateResult) -> String {
    format!(
        "{},{},{:.6},{:.6},{},{},{:.6},{:.6},{:.6},{:.6},{}",
        config.algorithm.name(),
        config.n,
        config.p.get(),
        config.param,
        result.trials,
        result.errors,
        result.error_rate,
        result.mean_queries,
        result.stderr_queries,
        result.empirical_rate,
        config.master_seed
    )
}

/// Parses `start:stop:step` into an inclusive grid of crossover probabilities.
pub fn parse_p_grid(text: &str) -> Result<Vec<CrossoverProb>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("bad p grid {text:?}: {e}")))?;
    let [start, stop, step] = parts[..] else {
        return Err(Error::Config(format!(
            "p grid must be start:stop:step, got {text:?}"
        )));
    };
    if step.is_nan() || step <= 0.0 || stop < start {
        return Err(Error::Config(format!("p grid {text:?} is empty")));
    }
    // count points from the rounded ratio so float drift cannot drop the endpoint
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|k| CrossoverProb::new(start + k as f64 * step))
        .collect()
}

/// Computes every rate curve on `p_grid` and writes the CSV to `path`.
pub fn emit_rate_curves(
    p_grid: &[CrossoverProb],
    delta_grid_size: usize,
    path: &Path,
) -> Result<Vec<RatePoint>> {
    if p_grid.is_empty() {
        return Err(Error::Config("empty p grid".into()));
    }
    if delta_grid_size < 2 {
        return Err(Error::Config("delta grid size must be at least 2".into()));
    }
    let points: Vec<RatePoint> = p_grid
        .par_iter()
        .map(|&p| rate_bounds_with_grid(p, delta_grid_size))
        .collect();
    let mut out = String::from(RATES_HEADER);
    out.push('\n');
    for pt in &points {
        out.push_str(&rate_row(pt));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(points)
}

pub fn write_sort_sim(
    config: &ExperimentConfig,
    result: &AggregateResult,
    path: &Path,
) -> Result<()> {
    fs::write(
        path,
        format!("{SORT_SIM_HEADER}\n{}\n", sort_sim_row(config, result)),
    )?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Fast,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: measured {:.3e}, tolerance {:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

pub const BAYES_TOL: f64 = 1e-9;
pub const MARTINGALE_TOL: f64 = 1e-9;
const VERIFY_SEED: u64 = 0x5eed;

/// Largest deviation between the recursive posterior and exact enumeration
/// over random transcripts (`n <= 8`, length `<= 30`). `alpha_override`
/// replaces the update parameter, which should break the match.
pub fn bayes_equivalence_deviation(
    transcripts: u64,
    alpha_override: Option<f64>,
    seed: u64,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for t in 0..transcripts {
        let mut rng = stream(seed, t, StreamRole::Query);
        let n = rng.gen_range(2..=8);
        let p = CrossoverProb::new([0.05, 0.1, 0.3][rng.gen_range(0..3)])?;
        let len = rng.gen_range(0..=30);
        let transcript: Vec<(usize, bool)> =
            (0..len).map(|_| (rng.gen_range(1..n), rng.gen())).collect();
        let mut state = PosteriorState::uniform(n, alpha_override.unwrap_or(p.get()), p)?;
        for &(b, y) in &transcript {
            state.update(b, y)?;
        }
        let exact = exact_bayes_oracle(n, &transcript, p)?;
        for (a, b) in state.probs().iter().zip(&exact) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleMargins {
    /// `min (E[dZ] - (1 - H(p)))` over sampled states.
    pub drift_margin: f64,
    /// `min (log2((1-p)/p) - |dZ|)` over realized steps.
    pub increment_margin: f64,
    pub states: u64,
}

/// Samples states reached by variable-length search runs and measures the
/// drift and increment margins of the log-odds of the true interval.
pub fn martingale_margins(states: u64, seed: u64) -> Result<MartingaleMargins> {
    let ps = [0.05, 0.1, 0.3];
    let margins: Vec<(f64, f64)> = (0..states)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64)> {
            let mut rng = stream(seed, t, StreamRole::Query);
            let p = CrossoverProb::new(ps[(t % 3) as usize])?;
            let n = rng.gen_range(2..=64);
            let target = rng.gen_range(1..=n);
            let steps = rng.gen_range(0..=40);
            let mut chan = SearchOracle::new(n, target, p, stream(seed, t, StreamRole::Noise))?;
            let mut state = PosteriorState::bayes(n, p)?;
            let cap = (1.0 - p.get()) / p.get();
            let cap = cap.log2();
            let mut inc_margin = f64::INFINITY;
            for _ in 0..steps {
                let before = state.log_odds_at(target);
                // keep clear of the probability floor
                if before > 200.0 {
                    break;
                }
                let c = choose_query_variable(&state.median_split(), p, &mut rng);
                let y = chan.search_query(c.j_star)?;
                state.update(c.j_star, y)?;
                inc_margin = inc_margin.min(cap - (state.log_odds_at(target) - before).abs());
            }
            let drift = expected_improvement(&state, target)? - (1.0 - binary_entropy(p.get())?);
            Ok((drift, inc_margin))
        })
        .collect::<Result<_>>()?;
    Ok(MartingaleMargins {
        drift_margin: margins.iter().map(|m| m.0).fold(f64::INFINITY, f64::min),
        increment_margin: margins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min),
        states,
    })
}

/// Fixed-length search error bound `(n - 1) g(p)^m`.
pub fn fixed_search_error_bound(n_intervals: usize, m: u64, p: CrossoverProb) -> f64 {
    (n_intervals as f64 - 1.0) * g_of_p(p.get()).expect("p < 1/2").powf(m as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCell {
    pub n_intervals: usize,
    pub m: u64,
    pub p: f64,
    pub trials: u64,
    pub errors: u64,
    pub bound: f64,
    /// `bound + 3 sigma`, with sigma the binomial standard error at the
    /// bound (capped at 1).
    pub ceiling: f64,
}

impl BoundCell {
    pub fn empirical(&self) -> f64 {
        self.errors as f64 / self.trials as f64
    }

    pub fn holds(&self) -> bool {
        self.empirical() <= self.ceiling
    }
}

/// Runs the fixed-length search on one `(n, m, p)` cell with uniform targets.
pub fn fixed_search_cell(
    n_intervals: usize,
    m: u64,
    p: CrossoverProb,
    trials: u64,
    seed: u64,
) -> Result<BoundCell> {
    let errors = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<u64> {
            let target = stream(seed, t, StreamRole::Truth).gen_range(1..=n_intervals);
            let mut chan =
                SearchOracle::new(n_intervals, target, p, stream(seed, t, StreamRole::Noise))?;
            let out = bz_fixed(&mut chan, m, p, &mut stream(seed, t, StreamRole::Query))?;
            Ok((out.l_hat != target) as u64)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    let bound = fixed_search_error_bound(n_intervals, m, p);
    let b = bound.min(1.0);
    Ok(BoundCell {
        n_intervals,
        m,
        p: p.get(),
        trials,
        errors,
        bound,
        ceiling: bound + 3.0 * (b * (1.0 - b) / trials as f64).sqrt(),
    })
}

/// Number of permutations with `n <= max_n` whose Lehmer round trip fails.
pub fn lehmer_round_trip_failures(max_n: usize) -> u64 {
    let mut failures = 0;
    for n in 1..=max_n {
        for perm in Permutation::all(n) {
            if lehmer_decode(&lehmer_encode(&perm)).ok().as_ref() != Some(&perm) {
                failures += 1;
            }
        }
    }
    failures
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderingMargins {
    /// Smallest gap between consecutive curves at `p > 0`.
    pub strict_gap: f64,
    /// Smallest gap at `p = 0`, where several curves meet.
    pub noiseless_gap: f64,
    /// Largest increase of any curve between consecutive grid points.
    pub max_increase: f64,
}

pub fn rate_ordering_margins(points: &[RatePoint]) -> OrderingMargins {
    let mut strict_gap = f64::INFINITY;
    let mut noiseless_gap = f64::INFINITY;
    for pt in points {
        let a = pt.as_array();
        let gap = a
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        if pt.p.is_noiseless() {
            noiseless_gap = noiseless_gap.min(gap);
        } else {
            strict_gap = strict_gap.min(gap);
        }
    }
    let mut max_increase = f64::NEG_INFINITY;
    for w in points.windows(2) {
        for (x, y) in w[0].as_array().iter().zip(w[1].as_array()) {
            max_increase = max_increase.max(y - x);
        }
    }
    OrderingMargins {
        strict_gap,
        noiseless_gap,
        max_increase,
    }
}

fn check(name: &str, passed: bool, measured: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed,
        measured,
        tolerance,
    }
}

/// Runs the property checks. `alpha_override` tampers with the update
/// parameter of the posterior-equivalence check.
pub fn verify_suite_with(scope: Scope, alpha_override: Option<f64>) -> Result<VerifyReport> {
    let full = scope == Scope::Full;
    let mut checks = Vec::new();

    let dev =
        bayes_equivalence_deviation(if full { 1000 } else { 200 }, alpha_override, VERIFY_SEED)?;
    checks.push(check(
        "posterior matches exact Bayes",
        dev < BAYES_TOL,
        dev,
        BAYES_TOL,
    ));

    let m = martingale_margins(if full { 10_000 } else { 1000 }, VERIFY_SEED)?;
    checks.push(check(
        "expected log-odds drift >= 1 - H(p)",
        m.drift_margin >= -MARTINGALE_TOL,
        m.drift_margin,
        MARTINGALE_TOL,
    ));
    checks.push(check(
        "log-odds increments <= log2((1-p)/p)",
        m.increment_margin >= -MARTINGALE_TOL,
        m.increment_margin,
        MARTINGALE_TOL,
    ));

    let (ns, ms, ps, trials): (&[usize], &[u64], &[f64], u64) = if full {
        (&[4, 8, 16], &[20, 40, 80], &[0.05, 0.1, 0.2], 10_000)
    } else {
        (&[4, 8], &[20, 40], &[0.1], 2000)
    };
    let mut worst = f64::NEG_INFINITY;
    for &n in ns {
        for &mm in ms {
            for &p in ps {
                let cell = fixed_search_cell(n, mm, CrossoverProb::new(p)?, trials, VERIFY_SEED)?;
                worst = worst.max(cell.empirical() - cell.ceiling);
            }
        }
    }
    checks.push(check(
        "fixed-length search error <= bound + 3 sigma",
        worst <= 0.0,
        worst,
        0.0,
    ));

    let fails = lehmer_round_trip_failures(if full { 7 } else { 6 });
    checks.push(check("Lehmer round trip", fails == 0, fails as f64, 0.0));

    let grid = parse_p_grid("0:0.49:0.01")?;
    let points: Vec<RatePoint> = grid
        .par_iter()
        .map(|&p| rate_bounds_with_grid(p, if full { 1000 } else { 200 }))
        .collect();
    let o = rate_ordering_margins(&points);
    checks.push(check(
        "rate curves strictly ordered for p > 0",
        o.strict_gap > 0.0,
        o.strict_gap,
        0.0,
    ));
    checks.push(check(
        "rate curves ordered at p = 0",
        o.noiseless_gap >= 0.0,
        o.noiseless_gap,
        0.0,
    ));
    checks.push(check(
        "rate curves decrease in p",
        o.max_increase <= 0.0,
        o.max_increase,
        0.0,
    ));

    Ok(VerifyReport { checks })
}

pub fn verify_suite(scope: Scope) -> Result<VerifyReport> {
    verify_suite_with(scope, None)
}
