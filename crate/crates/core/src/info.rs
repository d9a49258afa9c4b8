//! Closed-form information measures and the sorting-rate bounds built on them.
//!
//! All logarithms are base 2. Every function follows the `0 * log 0 = 0`
//! convention.

use std::f64::consts::LN_2;
use std::fmt;

use crate::error::{Error, Result};

/// Crossover probability of the binary symmetric comparison channel, `0 <= p < 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CrossoverProb(f64);

impl CrossoverProb {
    pub fn new(p: f64) -> Result<Self> {
        if (0.0..0.5).contains(&p) {
            Ok(Self(p))
        } else {
            Err(Error::Domain {
                name: "p",
                value: p,
                domain: "[0, 1/2)",
            })
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn is_noiseless(self) -> bool {
        self.0 == 0.0
    }
}

impl fmt::Display for CrossoverProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

fn check_prob(name: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value: x,
            domain: "[0, 1]",
        })
    }
}

/// `x * log2(x / y)` with `0 * log 0 = 0`.
fn xlog2_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).log2()
    }
}

/// Binary entropy `H(p)` in bits.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_prob("p", p)?;
    Ok(-xlog2_ratio(p, 1.0) - xlog2_ratio(1.0 - p, 1.0))
}

/// Binary KL divergence `D(a || b)` in bits.
pub fn kl_binary(a: f64, b: f64) -> Result<f64> {
    check_prob("a", a)?;
    check_prob("b", b)?;
    if (b == 0.0 && a > 0.0) || (b == 1.0 && a < 1.0) {
        return Err(Error::Infinite("D(a || b)"));
    }
    Ok(xlog2_ratio(a, b) + xlog2_ratio(1.0 - a, 1.0 - b))
}

/// `D(p || 1-p) = (1 - 2p) log2((1-p)/p)`. Accepts the limit point `p = 1/2`.
pub fn kl_p_vs_1mp(p: f64) -> Result<f64> {
    if p == 0.0 {
        return Err(Error::Infinite("D(p || 1-p) at p = 0"));
    }
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::Domain {
            name: "p",
            value: p,
            domain: "(0, 1/2]",
        });
    }
    Ok((1.0 - 2.0 * p) * ((1.0 - p) / p).log2())
}

/// Contraction factor of the fixed-length search, `1/2 + sqrt(p(1-p))`.
pub fn g_of_p(p: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::Domain {
            name: "p",
            value: p,
            domain: "[0, 1/2]",
        });
    }
    Ok(0.5 + (p * (1.0 - p)).sqrt())
}

/// `rho(x) = (1-p) log2(1 + (1-2p)x) + p log2(1 - (1-2p)x)` for `|x| <= 1`.
///
/// At `p = 0, x = -1` the first term is `log2 0` and the result is `-inf`.
pub fn rho(x: f64, p: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain {
            name: "x",
            value: x,
            domain: "[-1, 1]",
        });
    }
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::Domain {
            name: "p",
            value: p,
            domain: "[0, 1/2]",
        });
    }
    let c = 1.0 - 2.0 * p;
    let term = |w: f64, arg: f64| if w == 0.0 { 0.0 } else { w * arg.log2() };
    Ok(term(1.0 - p, 1.0 + c * x) + term(p, 1.0 - c * x))
}

/// Probability that a majority vote over `beta` repetitions errs,
/// `sum_{i >= ceil(beta/2)} C(beta, i) p^i (1-p)^(beta-i)`. Ties count as errors.
pub fn binom_majority_tail(beta: u32, p: f64) -> f64 {
    assert!(beta >= 1, "beta must be positive");
    if p == 0.0 {
        return 0.0;
    }
    let n = beta as usize;
    let k0 = n.div_ceil(2);
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    // ln C(n, k0)
    let mut ln_c = (0..k0)
        .map(|i| ((n - i) as f64 / (i + 1) as f64).ln())
        .sum::<f64>();
    let mut logs = Vec::with_capacity(n - k0 + 1);
    for i in k0..=n {
        logs.push(ln_c + i as f64 * lp + (n - i) as f64 * lq);
        if i < n {
            ln_c += ((n - i) as f64 / (i + 1) as f64).ln();
        }
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max.exp() * logs.iter().map(|l| (l - max).exp()).sum::<f64>()
}

/// `1 - (1 - tau)^3`, evaluated without cancellation for tiny `tau`.
pub fn node_failure_bound(tau: f64) -> f64 {
    tau * (3.0 - 3.0 * tau + tau * tau)
}

/// Largest repetition count searched by [`beta_of_p_delta`].
pub const BETA_CAP: u32 = 4001;

/// Smallest `beta` with `1 - (1 - tail(beta, p))^3 <= delta`.
pub fn beta_of_p_delta(p: CrossoverProb, delta: f64) -> Result<u32> {
    check_delta(delta)?;
    (1..=BETA_CAP)
        .find(|&b| node_failure_bound(binom_majority_tail(b, p.get())) <= delta)
        .ok_or(Error::BetaUnreachable {
            p: p.get(),
            delta,
            cap: BETA_CAP,
        })
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 0.5 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "delta",
            value: delta,
            domain: "(0, 1/2)",
        })
    }
}

/// Parameters of the noisy-searching-tree sorter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeigeParams {
    pub delta: f64,
    pub beta: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeigeRate {
    pub rate: f64,
    /// `None` when no grid point admits a feasible rate.
    pub best: Option<FeigeParams>,
}

impl FeigeRate {
    pub fn feasible(&self) -> bool {
        self.best.is_some()
    }
}

const FEIGE_BISECTION_TOL: f64 = 1e-9;

/// Largest `x = 3 beta R` with `x < 1 - 2 delta` and `x < D((1-x)/2 || delta) / ln 2`.
///
/// The right side of the second condition falls as `x` grows and reaches zero
/// at `x = 1 - 2 delta`, so the feasible set is an interval starting at 0.
fn max_scaled_rate(delta: f64) -> f64 {
    let slack = |x: f64| {
        let a = (1.0 - x) / 2.0;
        xlog2_ratio(a, delta) + xlog2_ratio(1.0 - a, 1.0 - delta) - x * LN_2
    };
    let (mut lo, mut hi) = (0.0, 1.0 - 2.0 * delta);
    // Tolerance on R is FEIGE_BISECTION_TOL; x = 3 beta R only gets tighter.
    while hi - lo > FEIGE_BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if slack(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Best sorting rate of the tree sorter at a fixed `delta`.
pub fn feige_rate_at_delta(p: CrossoverProb, delta: f64) -> Result<FeigeRate> {
    let beta = beta_of_p_delta(p, delta)?;
    Ok(FeigeRate {
        rate: max_scaled_rate(delta) / (3.0 * beta as f64),
        best: Some(FeigeParams { delta, beta }),
    })
}

/// The delta grid: `size` uniform points in (0, 1/2) and `size` log-spaced
/// points from 1/2 down to 1e-300, descending.
pub fn delta_grid(size: usize) -> Vec<f64> {
    let uniform = (1..=size).map(|k| 0.5 * k as f64 / (size + 1) as f64);
    let (hi, lo) = (0.5f64.log10(), -300.0);
    let geometric = (1..=size).map(|k| 10f64.powf(hi + (lo - hi) * k as f64 / size as f64));
    let mut grid: Vec<f64> = uniform
        .chain(geometric)
        .filter(|d| *d > 0.0 && *d < 0.5)
        .collect();
    grid.sort_by(|a, b| b.total_cmp(a));
    grid.dedup();
    grid
}

/// Supremum over the delta grid of the rate achievable by the tree sorter.
pub fn feige_rate_optimizer(p: CrossoverProb, delta_grid_size: usize) -> Result<FeigeRate> {
    if delta_grid_size < 2 {
        return Err(Error::Domain {
            name: "delta_grid_size",
            value: delta_grid_size as f64,
            domain: ">= 2",
        });
    }
    let grid = delta_grid(delta_grid_size);

    // The minimal beta is always odd (an even count never beats the odd count
    // below it), and the failure bound decreases along odd counts. Sweep the
    // descending grid against ascending odd beta.
    let mut best = FeigeRate {
        rate: 0.0,
        best: None,
    };
    let mut beta = 1u32;
    let mut threshold = node_failure_bound(binom_majority_tail(beta, p.get()));
    for &delta in &grid {
        while threshold > delta && beta + 2 <= BETA_CAP {
            beta += 2;
            threshold = node_failure_bound(binom_majority_tail(beta, p.get()));
        }
        if threshold > delta {
            break;
        }
        let rate = max_scaled_rate(delta) / (3.0 * beta as f64);
        if rate > best.rate {
            best = FeigeRate {
                rate,
                best: Some(FeigeParams { delta, beta }),
            };
        }
    }
    Ok(best)
}

/// The five rate curves at one crossover probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub p: CrossoverProb,
    pub feige_rate: f64,
    pub bz_fixed_rate: f64,
    pub vl_rate: f64,
    pub ins_converse: f64,
    pub capacity_upper: f64,
}

impl RatePoint {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.feige_rate,
            self.bz_fixed_rate,
            self.vl_rate,
            self.ins_converse,
            self.capacity_upper,
        ]
    }
}

pub const DEFAULT_DELTA_GRID: usize = 1000;

pub fn rate_bounds(p: CrossoverProb) -> RatePoint {
    rate_bounds_with_grid(p, DEFAULT_DELTA_GRID)
}

/// All bound curves at `p`. At `p = 0` the tree-sorter rate is its
/// `delta -> 0` limit 1/3 and the insertion converse its limit `1 - H(0) = 1`.
pub fn rate_bounds_with_grid(p: CrossoverProb, delta_grid_size: usize) -> RatePoint {
    let pv = p.get();
    let capacity = 1.0 - binary_entropy(pv).expect("p is a probability");
    let bz_fixed = 0.5 * (1.0 / g_of_p(pv).expect("p < 1/2")).log2();
    let (feige, ins) = if p.is_noiseless() {
        (1.0 / 3.0, capacity)
    } else {
        let d = kl_p_vs_1mp(pv).expect("0 < p < 1/2");
        let feige = feige_rate_optimizer(p, delta_grid_size.max(2))
            .expect("grid size >= 2")
            .rate;
        (feige, 1.0 / (1.0 / capacity + 1.0 / d))
    };
    RatePoint {
        p,
        feige_rate: feige,
        bz_fixed_rate: bz_fixed,
        vl_rate: 0.5 * capacity,
        ins_converse: ins,
        capacity_upper: capacity,
    }
}

/// Lower bound on the expected queries of any variable-length search over
/// `n` intervals with error `pe`, with the unspecified `O(1)` term dropped.
pub fn search_converse_bound(n: u64, pe: f64, p: CrossoverProb) -> Result<f64> {
    if n < 2 {
        return Err(Error::TooFewIntervals {
            min: 2,
            got: n as usize,
        });
    }
    converse_terms((n as f64).log2(), pe, p)
}

/// The same bound with `log2(n!)` in place of `log2 n`: the sorting converse.
pub fn sorting_converse_bound(n: u64, pe: f64, p: CrossoverProb) -> Result<f64> {
    if n < 2 {
        return Err(Error::TooFewIntervals {
            min: 2,
            got: n as usize,
        });
    }
    converse_terms(log2_factorial(n), pe, p)
}

fn converse_terms(log_count: f64, pe: f64, p: CrossoverProb) -> Result<f64> {
    if !(pe > 0.0 && pe < 1.0) {
        return Err(Error::Domain {
            name: "pe",
            value: pe,
            domain: "(0, 1)",
        });
    }
    let d = kl_p_vs_1mp(p.get())?;
    let c = 1.0 - binary_entropy(p.get())?;
    Ok(log_count / c + (1.0 / pe).log2() / d
        - (log_count - pe.log2()).log2() / d
        - pe * log_count / c)
}

pub fn log2_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).log2()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cp(p: f64) -> CrossoverProb {
        CrossoverProb::new(p).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn crossover_prob_domain() {
        assert!(CrossoverProb::new(0.0).is_ok());
        assert!(CrossoverProb::new(0.4999).is_ok());
        assert!(CrossoverProb::new(0.5).is_err());
        assert!(CrossoverProb::new(-0.1).is_err());
        assert!(CrossoverProb::new(f64::NAN).is_err());
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        close(binary_entropy(0.5).unwrap(), 1.0, 1e-15);
        close(binary_entropy(0.1).unwrap(), 0.468996, 1e-6);
        assert!(binary_entropy(1.5).is_err());
    }

    #[test]
    fn kl_values() {
        close(kl_p_vs_1mp(0.5).unwrap(), 0.0, 1e-15);
        close(kl_p_vs_1mp(0.1).unwrap(), 2.535940, 1e-5);
        close(kl_p_vs_1mp(0.25).unwrap(), 0.792481, 1e-5);
        assert_eq!(
            kl_p_vs_1mp(0.0),
            Err(Error::Infinite("D(p || 1-p) at p = 0"))
        );

        close(kl_binary(0.3, 0.3).unwrap(), 0.0, 1e-15);
        close(kl_binary(0.0, 0.5).unwrap(), 1.0, 1e-15);
        close(kl_binary(0.5, 0.1).unwrap(), 0.736966, 1e-5);
        assert!(matches!(kl_binary(0.2, 0.0), Err(Error::Infinite(_))));
    }

    #[test]
    fn kl_p_vs_1mp_matches_general_kl() {
        for p in [0.01, 0.1, 0.3, 0.45] {
            close(
                kl_p_vs_1mp(p).unwrap(),
                kl_binary(p, 1.0 - p).unwrap(),
                1e-12,
            );
        }
    }

    #[test]
    fn g_values() {
        assert_eq!(g_of_p(0.0).unwrap(), 0.5);
        close(g_of_p(0.1).unwrap(), 0.8, 1e-15);
        close(g_of_p(0.5).unwrap(), 1.0, 1e-15);
    }

    #[test]
    fn rho_values() {
        assert_eq!(rho(0.0, 0.1).unwrap(), 0.0);
        close(rho(1.0, 0.1).unwrap(), 0.531004, 1e-5);
        close(
            rho(0.5, 0.1).unwrap() + rho(-0.5, 0.1).unwrap(),
            -0.251539,
            1e-5,
        );
        assert!(rho(1.01, 0.1).is_err());
        // p = 0 endpoints
        assert_eq!(rho(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(rho(-1.0, 0.0).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn majority_tail_values() {
        close(binom_majority_tail(1, 0.1), 0.1, 1e-15);
        close(binom_majority_tail(3, 0.1), 0.028, 1e-15);
        close(binom_majority_tail(2, 0.1), 0.19, 1e-15);
        assert_eq!(binom_majority_tail(7, 0.0), 0.0);
    }

    #[test]
    fn beta_values() {
        assert_eq!(beta_of_p_delta(cp(0.0), 0.01).unwrap(), 1);
        assert_eq!(beta_of_p_delta(cp(0.1), 1.0 / 3.0).unwrap(), 1);
        assert_eq!(beta_of_p_delta(cp(0.1), 0.1).unwrap(), 3);
        assert!(beta_of_p_delta(cp(0.1), 0.5).is_err());
        assert!(matches!(
            beta_of_p_delta(cp(0.49), 1e-200),
            Err(Error::BetaUnreachable { .. })
        ));
    }

    #[test]
    fn failure_bound_is_stable_for_tiny_tau() {
        let tau = 1e-200;
        close(node_failure_bound(tau) / tau, 3.0, 1e-12);
        close(node_failure_bound(0.028), 1.0 - 0.972f64.powi(3), 1e-15);
    }

    #[test]
    fn optimizer_agrees_with_direct_beta() {
        let p = cp(0.1);
        let best = feige_rate_optimizer(p, 200).unwrap().best.unwrap();
        assert_eq!(best.beta, beta_of_p_delta(p, best.delta).unwrap());
    }

    #[test]
    fn rate_bounds_at_zero() {
        let r = rate_bounds(cp(0.0));
        assert_eq!(r.capacity_upper, 1.0);
        assert_eq!(r.vl_rate, 0.5);
        close(r.bz_fixed_rate, 0.5, 1e-15);
        close(r.feige_rate, 1.0 / 3.0, 1e-15);
        assert_eq!(r.ins_converse, 1.0);
    }

    #[test]
    fn rate_bounds_at_one_tenth() {
        let r = rate_bounds(cp(0.1));
        close(r.capacity_upper, 0.531004, 1e-4);
        close(r.vl_rate, 0.265502, 1e-4);
        close(r.bz_fixed_rate, 0.160964, 1e-4);
        close(r.ins_converse, 0.439070, 1e-4);
        assert!(r.feige_rate > 0.0 && r.feige_rate < 0.160964);
    }

    #[test]
    fn converse_bound_term_by_term() {
        // n = 2, pe = 1/2, p = 1/4: log2 n = 1, log2(1/pe) = 1, log2 log2(n/pe) = 1.
        let d = 0.792481250360578;
        let c = 1.0 - binary_entropy(0.25).unwrap();
        let expected = 1.0 / c + 1.0 / d - 1.0 / d - 0.5 / c;
        close(
            search_converse_bound(2, 0.5, cp(0.25)).unwrap(),
            expected,
            1e-12,
        );
        assert!(search_converse_bound(2, 0.5, cp(0.0)).is_err());
        assert!(search_converse_bound(1, 0.5, cp(0.1)).is_err());
    }

    #[test]
    fn converse_bound_grows_as_pe_shrinks() {
        let p = cp(0.1);
        let values: Vec<f64> = (2..40)
            .map(|k| search_converse_bound(1024, 2f64.powi(-k), p).unwrap())
            .collect();
        for w in values.windows(2) {
            assert!(w[1] > w[0], "{w:?}");
        }
    }

    #[test]
    fn sorting_converse_is_search_converse_over_n_factorial() {
        let p = cp(0.2);
        // 4! = 24 hypotheses
        let as_search = search_converse_bound(24, 0.01, p).unwrap();
        close(
            sorting_converse_bound(4, 0.01, p).unwrap(),
            as_search,
            1e-12,
        );
    }
}
