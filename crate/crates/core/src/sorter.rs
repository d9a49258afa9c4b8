//! Insertion-based noisy sorting. Items `n-2, n-3, ..., 0` are inserted in
//! turn into the estimated order of the items after them, each insertion
//! being one noisy search over `i + 1` positions.

use rand::Rng;

use crate::error::{Error, Result};
use crate::info::{beta_of_p_delta, CrossoverProb};
use crate::oracle::{ComparisonOracle, Permutation, SearchChannel};
use crate::search::{bz_fixed, bz_variable, nst_search, SearchOutcome};

/// Items placed so far, in estimated ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortedPrefix {
    sigma: Vec<usize>,
}

impl SortedPrefix {
    pub fn new(first: usize) -> Self {
        Self { sigma: vec![first] }
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.sigma
    }

    /// Places `item` so that it becomes the `l_hat`-th element (1-based).
    pub fn splice(&mut self, l_hat: usize, item: usize) {
        self.sigma.insert(l_hat - 1, item);
    }
}

/// Search channel for one insertion: boundary `b` compares the `b`-th placed
/// item against the item being inserted.
pub struct InsertionChannel<'a> {
    oracle: &'a mut ComparisonOracle,
    placed: &'a [usize],
    item: usize,
}

impl<'a> InsertionChannel<'a> {
    pub fn new(oracle: &'a mut ComparisonOracle, placed: &'a [usize], item: usize) -> Self {
        Self {
            oracle,
            placed,
            item,
        }
    }
}

impl SearchChannel for InsertionChannel<'_> {
    fn n_intervals(&self) -> usize {
        self.placed.len() + 1
    }

    fn query(&mut self, boundary: usize) -> Result<bool> {
        if !(1..=self.placed.len()).contains(&boundary) {
            return Err(Error::IndexOutOfRange {
                index: boundary,
                max: self.placed.len(),
            });
        }
        self.oracle.compare(self.placed[boundary - 1], self.item)
    }

    fn queries_made(&self) -> u64 {
        self.oracle.ledger().total()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortOutcome {
    pub pi_hat: Permutation,
    pub total_queries: u64,
    pub per_insertion_queries: Vec<u64>,
    /// 1-based position chosen at each insertion.
    pub positions: Vec<usize>,
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SortBudget {
    FixedRate(f64),
    VariablePe(f64),
}

impl SortBudget {
    /// Total fixed-length budget `m = ceil(n log2 n / R)`.
    pub fn total_queries(rate: f64, n: usize) -> u64 {
        let n = n as f64;
        (n * n.log2() / rate).ceil() as u64
    }

    /// `floor(m / (n - 1))`, or an error when that is zero.
    pub fn per_insertion(rate: f64, n: usize) -> Result<u64> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Domain {
                name: "rate",
                value: rate,
                domain: "(0, inf)",
            });
        }
        if n < 2 {
            return Ok(0);
        }
        let per = Self::total_queries(rate, n) / (n as u64 - 1);
        if per == 0 {
            return Err(Error::ZeroBudget { rate, n });
        }
        Ok(per)
    }

    /// Per-insertion error tolerance `pe / n`.
    pub fn per_insertion_pe(pe: f64, n: usize) -> Result<f64> {
        if !(pe > 0.0 && pe < 1.0) {
            return Err(Error::Domain {
                name: "pe",
                value: pe,
                domain: "(0, 1)",
            });
        }
        Ok(pe / n as f64)
    }
}

/// Runs the insertion loop with `search` as the per-insertion subroutine.
pub fn insertion_sort_generic<F>(
    oracle: &mut ComparisonOracle,
    mut search: F,
) -> Result<SortOutcome>
where
    F: FnMut(&mut InsertionChannel<'_>) -> Result<SearchOutcome>,
{
    let n = oracle.n();
    let mut prefix = SortedPrefix::new(n - 1);
    let mut per_insertion = Vec::with_capacity(n.saturating_sub(1));
    let mut positions = Vec::with_capacity(n.saturating_sub(1));
    for i in 1..n {
        let item = n - 1 - i;
        oracle.ledger_mut().set_phase(i);
        let before = oracle.ledger().total();
        let placed = prefix.as_slice().to_vec();
        let out = search(&mut InsertionChannel::new(oracle, &placed, item))?;
        per_insertion.push(oracle.ledger().total() - before);
        positions.push(out.l_hat);
        prefix.splice(out.l_hat, item);
    }
    Ok(SortOutcome {
        pi_hat: Permutation::new(prefix.sigma)?,
        total_queries: per_insertion.iter().sum(),
        per_insertion_queries: per_insertion,
        positions,
        correct: None,
    })
}

/// Fixed-length code: each insertion runs the fixed-length search with
/// `floor(m / (n-1))` queries; the remainder of `m` is unused.
pub fn sort_fixed<R: Rng + ?Sized>(
    oracle: &mut ComparisonOracle,
    rate: f64,
    rng: &mut R,
) -> Result<SortOutcome> {
    let p = oracle.p();
    let per = SortBudget::per_insertion(rate, oracle.n())?;
    insertion_sort_generic(oracle, |chan| bz_fixed(chan, per, p, rng))
}

/// Variable-length code with per-insertion tolerance `pe / n`.
pub fn sort_variable<R: Rng + ?Sized>(
    oracle: &mut ComparisonOracle,
    pe: f64,
    rng: &mut R,
) -> Result<SortOutcome> {
    let p = oracle.p();
    let tol = SortBudget::per_insertion_pe(pe, oracle.n())?;
    insertion_sort_generic(oracle, |chan| bz_variable(chan, tol, p, rng))
}

/// Checks `3 beta R < 1 - 2 delta` and returns `beta(p, delta)`.
pub fn nst_beta(p: CrossoverProb, rate: f64, delta: f64) -> Result<u32> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::Domain {
            name: "delta",
            value: delta,
            domain: "(0, 1/2)",
        });
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::Domain {
            name: "rate",
            value: rate,
            domain: "(0, inf)",
        });
    }
    let beta = beta_of_p_delta(p, delta)?;
    if 3.0 * beta as f64 * rate >= 1.0 - 2.0 * delta {
        return Err(Error::Infeasible(format!(
            "3 * beta * R = {} must be below 1 - 2 delta = {}",
            3.0 * beta as f64 * rate,
            1.0 - 2.0 * delta
        )));
    }
    Ok(beta)
}

/// Tree-walk code: `beta = beta(p, delta)` and `floor(m / (n-1))` queries
/// per insertion.
pub fn sort_nst(oracle: &mut ComparisonOracle, rate: f64, delta: f64) -> Result<SortOutcome> {
    let beta = nst_beta(oracle.p(), rate, delta)?;
    let per = SortBudget::per_insertion(rate, oracle.n())?;
    insertion_sort_generic(oracle, |chan| nst_search(chan, per, beta))
}

/// Exact-equality correctness and the per-trial rate `n log2 n / M`.
pub fn evaluate_outcome(outcome: &SortOutcome, truth: &Permutation) -> Result<(bool, f64)> {
    if outcome.pi_hat.len() != truth.len() {
        return Err(Error::SizeMismatch(outcome.pi_hat.len(), truth.len()));
    }
    let n = truth.len() as f64;
    Ok((
        &outcome.pi_hat == truth,
        n * n.log2() / outcome.total_queries as f64,
    ))
}
