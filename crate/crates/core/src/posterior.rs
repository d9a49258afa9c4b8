//! Posterior over the sub-intervals of a noisy search.
//!
//! The state is the belief vector `q`, stored in linear space. After every
//! update it is renormalized and, when the update parameter is positive,
//! floored at [`PROB_FLOOR`] so that no interval is ever ruled out for good.

use rand::Rng;

use crate::error::{Error, Result};
use crate::info::{rho, CrossoverProb};

pub const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    q: Vec<f64>,
    step: u64,
    alpha: f64,
    p: CrossoverProb,
}

/// Interval `j` holding the posterior median, with the two biases
/// `tau1 = 2 * sum_{i >= j} q(i) - 1` and `tau2 = 2 * sum_{i <= j} q(i) - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianSplit {
    pub j: usize,
    pub tau1: f64,
    pub tau2: f64,
    pub n_intervals: usize,
}

/// The boundary to query and the probability with which the left endpoint
/// `j - 1` of the median interval was chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryChoice {
    pub j_star: usize,
    pub prob_left: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogOdds {
    z: Vec<f64>,
}

impl LogOdds {
    pub fn values(&self) -> &[f64] {
        &self.z
    }

    pub fn max(&self) -> f64 {
        self.z.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Some interval holds all the mass (its log-odds is `+inf`).
    pub fn saturated(&self) -> bool {
        self.z.contains(&f64::INFINITY)
    }
}

/// Crossover parameter used by the fixed-length search.
pub fn bz_alpha(p: CrossoverProb) -> f64 {
    let (a, b) = (p.get().sqrt(), (1.0 - p.get()).sqrt());
    a / (a + b)
}

impl PosteriorState {
    /// Uniform prior over `n_intervals` intervals. `alpha` is the crossover
    /// value used in updates; `alpha = p` gives the exact Bayes posterior.
    pub fn uniform(n_intervals: usize, alpha: f64, p: CrossoverProb) -> Result<Self> {
        if n_intervals < 2 {
            return Err(Error::TooFewIntervals {
                min: 2,
                got: n_intervals,
            });
        }
        if !(0.0..=0.5).contains(&alpha) {
            return Err(Error::Domain {
                name: "alpha",
                value: alpha,
                domain: "[0, 1/2]",
            });
        }
        Ok(Self {
            q: vec![1.0 / n_intervals as f64; n_intervals],
            step: 0,
            alpha,
            p,
        })
    }

    /// Exact-Bayes state (`alpha = p`).
    pub fn bayes(n_intervals: usize, p: CrossoverProb) -> Result<Self> {
        Self::uniform(n_intervals, p.get(), p)
    }

    pub fn n_intervals(&self) -> usize {
        self.q.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.q
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p(&self) -> CrossoverProb {
        self.p
    }

    /// 1-based index of the largest posterior; ties go to the smallest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.q.iter().enumerate() {
            if v > self.q[best] {
                best = i;
            }
        }
        best + 1
    }

    pub fn median_split(&self) -> MedianSplit {
        let n = self.q.len();
        let mut cum = 0.0;
        let mut j = n;
        for (i, &v) in self.q.iter().enumerate() {
            cum += v;
            if cum > 0.5 {
                j = i + 1;
                break;
            }
        }
        let upto: f64 = self.q[..j].iter().sum();
        let from: f64 = self.q[j - 1..].iter().sum();
        MedianSplit {
            j,
            tau1: 2.0 * from - 1.0,
            tau2: 2.0 * upto - 1.0,
            n_intervals: n,
        }
    }

    /// Bayes-style update after querying boundary `j_star` and observing `y`.
    ///
    /// `y = 1` says the target lies right of the boundary: intervals
    /// `i > j_star` are scaled by `2(1 - alpha)` and the rest by `2 alpha`;
    /// `y = 0` swaps the roles. Both are divided by the evidence
    /// `1 + (1 - 2y)(1 - 2 alpha) tau` with `tau = 2 sum_{i <= j_star} q(i) - 1`.
    pub fn update(&mut self, j_star: usize, y: bool) -> Result<()> {
        let n = self.q.len();
        if !(1..n).contains(&j_star) {
            return Err(Error::IndexOutOfRange {
                index: j_star,
                max: n - 1,
            });
        }
        let a = self.alpha;
        let left: f64 = self.q[..j_star].iter().sum();
        let right: f64 = self.q[j_star..].iter().sum();
        // Evidence split into left/right masses; equals 1 + (1-2y)(1-2a)tau
        // when left + right = 1.
        let (w_left, w_right) = if y { (a, 1.0 - a) } else { (1.0 - a, a) };
        let evidence = 2.0 * (w_left * left + w_right * right);
        if !(evidence > 0.0 && evidence.is_finite()) {
            return Err(Error::ImpossibleResponse);
        }
        let (f_left, f_right) = (2.0 * w_left / evidence, 2.0 * w_right / evidence);
        for (i, v) in self.q.iter_mut().enumerate() {
            *v *= if i < j_star { f_left } else { f_right };
        }
        self.normalize();
        self.step += 1;
        Ok(())
    }

    fn normalize(&mut self) {
        if self.alpha > 0.0 {
            for v in &mut self.q {
                *v = v.max(PROB_FLOOR);
            }
        }
        let total: f64 = self.q.iter().sum();
        for v in &mut self.q {
            *v /= total;
        }
    }

    /// `log2(q(i) / (1 - q(i)))`, with `1 - q(i)` summed from the other
    /// entries so it does not cancel near 1.
    pub fn log_odds_at(&self, i: usize) -> f64 {
        let others: f64 = self
            .q
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i - 1)
            .map(|(_, v)| v)
            .sum();
        self.q[i - 1].log2() - others.log2()
    }

    pub fn log_odds(&self) -> LogOdds {
        let total: f64 = self.q.iter().sum();
        let z = self
            .q
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                // Rest-of-mass via the sum of the others; cheaper than
                // log_odds_at per entry and equal to it term by term.
                let others: f64 = if v < 0.5 {
                    total - v
                } else {
                    self.q
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != k)
                        .map(|(_, w)| w)
                        .sum()
                };
                v.log2() - others.log2()
            })
            .collect();
        LogOdds { z }
    }

    /// `max_i Z(i)` without materializing the full log-odds vector.
    pub fn max_log_odds(&self) -> f64 {
        self.log_odds_at(self.argmax())
    }
}

fn forced_left_probability(split: &MedianSplit) -> Option<f64> {
    if split.j == 1 {
        // boundary 0 does not exist
        Some(0.0)
    } else if split.j == split.n_intervals {
        // boundary n does not exist
        Some(1.0)
    } else {
        None
    }
}

/// Probability of querying `j - 1` under the fixed-length rule,
/// `p* = (2 sum_{i <= j} q(i) - 1) / (2 q(j)) = tau2 / (tau1 + tau2)`.
pub fn fixed_left_probability(split: &MedianSplit) -> f64 {
    forced_left_probability(split)
        .unwrap_or_else(|| (split.tau2 / (split.tau1 + split.tau2)).clamp(0.0, 1.0))
}

/// Probability `pi1` of querying `j - 1` under the variable-length rule.
pub fn variable_left_probability(split: &MedianSplit, p: CrossoverProb) -> f64 {
    if let Some(forced) = forced_left_probability(split) {
        return forced;
    }
    let gap = |t: f64| {
        let t = t.clamp(-1.0, 1.0);
        rho(t, p.get()).expect("clamped") - rho(-t, p.get()).expect("clamped")
    };
    let (a, b) = (gap(split.tau1), gap(split.tau2));
    let pi1 = match (a.is_infinite(), b.is_infinite()) {
        (true, true) => 0.5,
        (true, false) => 0.0,
        (false, true) => 1.0,
        _ if a + b == 0.0 => 0.5,
        _ => b / (a + b),
    };
    pi1.clamp(0.0, 1.0)
}

fn draw<R: Rng + ?Sized>(split: &MedianSplit, prob_left: f64, rng: &mut R) -> QueryChoice {
    let left = rng.gen::<f64>() < prob_left;
    QueryChoice {
        j_star: if left { split.j - 1 } else { split.j },
        prob_left,
    }
}

pub fn choose_query_fixed<R: Rng + ?Sized>(split: &MedianSplit, rng: &mut R) -> QueryChoice {
    draw(split, fixed_left_probability(split), rng)
}

pub fn choose_query_variable<R: Rng + ?Sized>(
    split: &MedianSplit,
    p: CrossoverProb,
    rng: &mut R,
) -> QueryChoice {
    draw(split, variable_left_probability(split, p), rng)
}

/// Posterior after a transcript of `(boundary, response)` pairs, computed by
/// multiplying channel likelihoods under each hypothesis and normalizing.
/// Independent of [`PosteriorState::update`]; used to check it.
pub fn exact_bayes_oracle(
    n_intervals: usize,
    transcript: &[(usize, bool)],
    p: CrossoverProb,
) -> Result<Vec<f64>> {
    if n_intervals < 2 {
        return Err(Error::TooFewIntervals {
            min: 2,
            got: n_intervals,
        });
    }
    let (ln_hit, ln_miss) = ((1.0 - p.get()).ln(), p.get().ln());
    let mut log_lik = vec![0.0f64; n_intervals];
    for &(b, y) in transcript {
        if !(1..n_intervals).contains(&b) {
            return Err(Error::IndexOutOfRange {
                index: b,
                max: n_intervals - 1,
            });
        }
        for (h, ll) in log_lik.iter_mut().enumerate() {
            let noiseless = b < h + 1;
            *ll += if noiseless == y { ln_hit } else { ln_miss };
        }
    }
    let max = log_lik.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_lik.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// Exact `E[Z_next(l*) | q] - Z(l*)` for the variable-length rule with
/// `alpha = p`, enumerating both query choices and both responses.
pub fn expected_improvement(state: &PosteriorState, l_star: usize) -> Result<f64> {
    let n = state.n_intervals();
    if !(1..=n).contains(&l_star) {
        return Err(Error::IndexOutOfRange {
            index: l_star,
            max: n,
        });
    }
    let p = state.p();
    let split = state.median_split();
    let pi1 = variable_left_probability(&split, p);
    let z_now = state.log_odds_at(l_star);
    let mut expected = 0.0;
    for (j_star, weight) in [(split.j - 1, pi1), (split.j, 1.0 - pi1)] {
        if weight == 0.0 {
            continue;
        }
        for y in [false, true] {
            let truthful = y == (j_star < l_star);
            let lik = if truthful { 1.0 - p.get() } else { p.get() };
            if lik == 0.0 {
                continue;
            }
            let mut next = state.clone();
            next.update(j_star, y)?;
            expected += weight * lik * next.log_odds_at(l_star);
        }
    }
    Ok(expected - z_now)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cp(p: f64) -> CrossoverProb {
        CrossoverProb::new(p).unwrap()
    }

    fn with_q(q: Vec<f64>, p: f64) -> PosteriorState {
        PosteriorState {
            q,
            step: 0,
            alpha: p,
            p: cp(p),
        }
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn uniform_init() {
        let s = PosteriorState::bayes(2, cp(0.1)).unwrap();
        assert_eq!(s.probs(), &[0.5, 0.5]);
        assert_eq!(s.log_odds().values(), &[0.0, 0.0]);
        let s = PosteriorState::bayes(4, cp(0.1)).unwrap();
        assert_eq!(s.probs(), &[0.25; 4]);
        let s = PosteriorState::bayes(3, cp(0.1)).unwrap();
        for z in s.log_odds().values() {
            close(*z, -1.0, 1e-12);
        }
        assert!(PosteriorState::bayes(1, cp(0.1)).is_err());
        assert!(PosteriorState::uniform(3, 0.6, cp(0.1)).is_err());
    }

    #[test]
    fn median_split_examples() {
        let s = PosteriorState::bayes(4, cp(0.1)).unwrap().median_split();
        assert_eq!((s.j, s.tau1, s.tau2), (3, 0.0, 0.5));
        let s = PosteriorState::bayes(2, cp(0.1)).unwrap().median_split();
        assert_eq!((s.j, s.tau1, s.tau2), (2, 0.0, 1.0));
        let s = with_q(vec![0.7, 0.2, 0.1], 0.1).median_split();
        assert_eq!(s.j, 1);
        close(s.tau1, 1.0, 1e-12);
        close(s.tau2, 0.4, 1e-12);
    }

    #[test]
    fn fixed_rule_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let split = PosteriorState::bayes(4, cp(0.1)).unwrap().median_split();
        assert_eq!(fixed_left_probability(&split), 1.0);
        for _ in 0..20 {
            assert_eq!(choose_query_fixed(&split, &mut rng).j_star, 2);
        }
        let eps = 0.1;
        let split = with_q(vec![0.5 - eps, 0.5 + eps], 0.1).median_split();
        assert_eq!(split.j, 2);
        // j = n forces the left endpoint; the unforced p* would be 1/(2 q(2)) < 1
        close(
            split.tau2 / (split.tau1 + split.tau2),
            1.0 / (2.0 * (0.5 + eps)),
            1e-12,
        );
        assert_eq!(fixed_left_probability(&split), 1.0);
        let split = with_q(vec![0.7, 0.2, 0.1], 0.1).median_split();
        assert_eq!(fixed_left_probability(&split), 0.0);
    }

    #[test]
    fn variable_rule_examples() {
        let p = cp(0.1);
        let sym = MedianSplit {
            j: 2,
            tau1: 0.3,
            tau2: 0.3,
            n_intervals: 4,
        };
        close(variable_left_probability(&sym, p), 0.5, 1e-15);
        let zero = MedianSplit {
            j: 2,
            tau1: 0.3,
            tau2: 0.0,
            n_intervals: 4,
        };
        assert_eq!(variable_left_probability(&zero, p), 0.0);
        let both = MedianSplit {
            j: 2,
            tau1: 0.0,
            tau2: 0.0,
            n_intervals: 4,
        };
        assert_eq!(variable_left_probability(&both, p), 0.5);
        let split = PosteriorState::bayes(4, p).unwrap().median_split();
        assert_eq!(variable_left_probability(&split, p), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(choose_query_variable(&split, p, &mut rng).j_star, 2);
    }

    #[test]
    fn update_examples() {
        let mut s = PosteriorState::bayes(2, cp(0.0)).unwrap();
        s.update(1, true).unwrap();
        assert_eq!(s.probs(), &[0.0, 1.0]);
        assert_eq!(s.step(), 1);
        assert!(s.log_odds().saturated());

        let mut s = PosteriorState::uniform(2, 0.2, cp(0.1)).unwrap();
        s.update(1, true).unwrap();
        close(s.probs()[0], 0.2, 1e-15);
        close(s.probs()[1], 0.8, 1e-15);

        let mut s = PosteriorState::uniform(4, 0.25, cp(0.1)).unwrap();
        s.update(2, false).unwrap();
        for (a, b) in s.probs().iter().zip([0.375, 0.375, 0.125, 0.125]) {
            close(*a, b, 1e-15);
        }
    }

    #[test]
    fn update_rejects_bad_boundary_and_impossible_response() {
        let mut s = PosteriorState::bayes(3, cp(0.1)).unwrap();
        assert!(s.update(0, true).is_err());
        assert!(s.update(3, true).is_err());
        let mut s = PosteriorState::bayes(2, cp(0.0)).unwrap();
        s.update(1, true).unwrap();
        // all mass right of boundary 1; a noiseless "left" answer is impossible
        assert_eq!(s.update(1, false), Err(Error::ImpossibleResponse));
    }

    #[test]
    fn log_odds_examples() {
        let s = with_q(vec![0.5, 0.5], 0.1);
        assert_eq!(s.log_odds().values()[0], 0.0);
        let s = with_q(vec![0.8, 0.1, 0.1], 0.1);
        close(s.log_odds().values()[0], 2.0, 1e-12);
        close(s.max_log_odds(), 2.0, 1e-12);
        for n in [3usize, 8, 100] {
            let s = PosteriorState::bayes(n, cp(0.1)).unwrap();
            close(s.log_odds().values()[0], -((n - 1) as f64).log2(), 1e-12);
        }
    }

    #[test]
    fn exact_oracle_examples() {
        assert_eq!(exact_bayes_oracle(4, &[], cp(0.1)).unwrap(), vec![0.25; 4]);
        let post = exact_bayes_oracle(2, &[(1, true)], cp(0.1)).unwrap();
        close(post[0], 0.1, 1e-15);
        close(post[1], 0.9, 1e-15);
    }

    #[test]
    fn expected_improvement_two_intervals_by_hand() {
        // n = 2, uniform, p = 0.1: j = 2 forces the query at boundary 1.
        // For l* = 2 the truthful answer (prob 0.9) gives q(2) = 0.9, the lie q(2) = 0.1.
        let p = 0.1;
        let s = PosteriorState::bayes(2, cp(p)).unwrap();
        let z = |q: f64| (q / (1.0 - q)).log2();
        let by_hand = 0.9 * z(0.9) + 0.1 * z(0.1) - 0.0;
        close(expected_improvement(&s, 2).unwrap(), by_hand, 1e-12);
        close(expected_improvement(&s, 1).unwrap(), by_hand, 1e-12);
    }

    #[test]
    fn expected_improvement_near_saturation() {
        let p = 0.1;
        let floor = 1.0 - crate::info::binary_entropy(p).unwrap() - 1e-9;
        for rest in [1e-3, 1e-6, 1e-9, 1e-12] {
            let n = 6;
            let mut q = vec![rest / (n - 1) as f64; n];
            q[2] = 1.0 - rest;
            let s = with_q(q, p);
            assert!(expected_improvement(&s, 3).unwrap() >= floor);
        }
    }

    fn transcript_strategy() -> impl Strategy<Value = (usize, f64, Vec<(usize, bool)>)> {
        (2usize..=8, prop::sample::select(vec![0.05, 0.1, 0.3])).prop_flat_map(|(n, p)| {
            (
                Just(n),
                Just(p),
                prop::collection::vec((1..n, any::<bool>()), 0..=30),
            )
        })
    }

    proptest! {
        #[test]
        fn update_chain_matches_exact_bayes((n, p, transcript) in transcript_strategy()) {
            let mut s = PosteriorState::bayes(n, cp(p)).unwrap();
            for &(b, y) in &transcript {
                s.update(b, y).unwrap();
                let total: f64 = s.probs().iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
            }
            let exact = exact_bayes_oracle(n, &transcript, cp(p)).unwrap();
            for (a, b) in s.probs().iter().zip(&exact) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn split_identities(q in prop::collection::vec(0.001f64..1.0, 2..20)) {
            let total: f64 = q.iter().sum();
            let s = with_q(q.iter().map(|v| v / total).collect(), 0.1);
            let split = s.median_split();
            prop_assert!((split.tau1 + split.tau2 - 2.0 * s.probs()[split.j - 1]).abs() < 1e-12);
            let below: f64 = s.probs()[..split.j - 1].iter().sum();
            prop_assert!(below <= 0.5 && below + s.probs()[split.j - 1] > 0.5);
            prop_assert!(split.tau2 >= 0.0);
            let pf = fixed_left_probability(&split);
            let pv = variable_left_probability(&split, cp(0.1));
            prop_assert!((0.0..=1.0).contains(&pf) && (0.0..=1.0).contains(&pv));
        }

        #[test]
        fn scaling_preserves_split_and_argmax(
            q in prop::collection::vec(0.001f64..1.0, 2..20),
            k in -20i32..20,
        ) {
            let norm = |v: &[f64]| {
                let t: f64 = v.iter().sum();
                v.iter().map(|x| x / t).collect::<Vec<_>>()
            };
            let scale = 2f64.powi(k);
            let scaled: Vec<f64> = q.iter().map(|v| v * scale).collect();
            let a = with_q(norm(&q), 0.1);
            let b = with_q(norm(&scaled), 0.1);
            prop_assert_eq!(a.median_split().j, b.median_split().j);
            prop_assert_eq!(a.argmax(), b.argmax());
        }
    }
}
