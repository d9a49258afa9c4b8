//! Ground truth and the noisy channels that are the only way to observe it.
//!
//! Items are 0-based (`0..n`). Search intervals and boundaries are 1-based:
//! intervals `I_1..I_n`, boundaries `1..n-1`, matching the usual
//! `I_i = (b_{i-1}, b_i]` picture.

use rand::Rng;

use crate::error::{Error, Result};
use crate::info::CrossoverProb;
use crate::rng::TrialRng;

/// A permutation of `0..n`. `as_slice()[r]` is the item of rank `r`, so the
/// hidden values satisfy `theta[perm[0]] < theta[perm[1]] < ...`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        if mapping.is_empty() {
            return Err(Error::InvalidPermutation("empty".into()));
        }
        let mut seen = vec![false; mapping.len()];
        for &v in &mapping {
            if v >= mapping.len() || std::mem::replace(&mut seen[v], true) {
                return Err(Error::InvalidPermutation(format!("{mapping:?}")));
            }
        }
        Ok(Self(mapping))
    }

    /// Builds from 1-based values, e.g. `[2, 3, 1]`.
    pub fn from_one_based(values: &[usize]) -> Result<Self> {
        if values.contains(&0) {
            return Err(Error::InvalidPermutation(format!("{values:?}")));
        }
        Self::new(values.iter().map(|v| v - 1).collect())
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn reversed(n: usize) -> Self {
        Self((0..n).rev().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.0.iter().map(|v| v + 1).collect()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &v) in self.0.iter().enumerate() {
            inv[v] = i;
        }
        Self(inv)
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(
            self.len(),
            other.len(),
            "composing permutations of different size"
        );
        Self(other.0.iter().map(|&i| self.0[i]).collect())
    }

    /// Every permutation of `0..n` in lexicographic order.
    pub fn all(n: usize) -> Vec<Self> {
        let mut cur: Vec<usize> = (0..n).collect();
        let mut out = vec![Self(cur.clone())];
        // next lexicographic permutation
        loop {
            let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
                return out;
            };
            let j = (i..n)
                .rev()
                .find(|&j| cur[j] > cur[i - 1])
                .expect("pivot has a successor");
            cur.swap(i - 1, j);
            cur[i..].reverse();
            out.push(Self(cur.clone()));
        }
    }
}

/// Lehmer code: entry `i` counts later positions holding a smaller value,
/// so `0 <= entries[i] <= n - 1 - i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LehmerCode(Vec<usize>);

impl LehmerCode {
    pub fn new(entries: Vec<usize>) -> Result<Self> {
        let n = entries.len();
        for (i, &e) in entries.iter().enumerate() {
            if e > n - 1 - i {
                return Err(Error::InvalidLehmer {
                    index: i,
                    value: e,
                    bound: n - 1 - i,
                });
            }
        }
        Ok(Self(entries))
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }
}

pub fn lehmer_encode(perm: &Permutation) -> LehmerCode {
    let v = perm.as_slice();
    LehmerCode(
        v.iter()
            .enumerate()
            .map(|(i, &x)| v[i + 1..].iter().filter(|&&y| y < x).count())
            .collect(),
    )
}

pub fn lehmer_decode(code: &LehmerCode) -> Result<Permutation> {
    let code = LehmerCode::new(code.0.clone())?;
    let mut remaining: Vec<usize> = (0..code.0.len()).collect();
    Ok(Permutation(
        code.0.iter().map(|&e| remaining.remove(e)).collect(),
    ))
}

/// Uniform permutation built from independent uniform Lehmer entries.
pub fn sample_uniform_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Permutation {
    assert!(n >= 1, "permutation size must be positive");
    let entries = (0..n).map(|i| rng.gen_range(0..=n - 1 - i)).collect();
    lehmer_decode(&LehmerCode(entries)).expect("sampled entries are in range")
}

/// Query counts, split by phase (the insertion index while sorting).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryLedger {
    per_phase: Vec<u64>,
    phase: usize,
    total: u64,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_phase(&mut self, phase: usize) {
        self.phase = phase;
    }

    pub fn record(&mut self) {
        if self.per_phase.len() <= self.phase {
            self.per_phase.resize(self.phase + 1, 0);
        }
        self.per_phase[self.phase] += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn phase_count(&self, phase: usize) -> u64 {
        self.per_phase.get(phase).copied().unwrap_or(0)
    }

    pub fn per_phase(&self) -> &[u64] {
        &self.per_phase
    }
}

fn flip<R: Rng + ?Sized>(rng: &mut R, p: CrossoverProb) -> bool {
    rng.gen::<f64>() < p.get()
}

/// Noisy pairwise comparisons against a hidden permutation.
#[derive(Debug, Clone)]
pub struct ComparisonOracle {
    truth: Permutation,
    rank: Vec<usize>,
    p: CrossoverProb,
    rng: TrialRng,
    ledger: QueryLedger,
}

impl ComparisonOracle {
    pub fn new(truth: Permutation, p: CrossoverProb, rng: TrialRng) -> Self {
        let rank = truth.inverse().0;
        Self {
            truth,
            rank,
            p,
            rng,
            ledger: QueryLedger::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.rank.len()
    }

    pub fn p(&self) -> CrossoverProb {
        self.p
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn ledger_mut(&mut self) -> &mut QueryLedger {
        &mut self.ledger
    }

    /// Noisy answer to "is item `i` below item `j`?".
    pub fn compare(&mut self, i: usize, j: usize) -> Result<bool> {
        let n = self.n();
        for x in [i, j] {
            if x >= n {
                return Err(Error::IndexOutOfRange {
                    index: x,
                    max: n - 1,
                });
            }
        }
        if i == j {
            return Err(Error::SelfComparison(i));
        }
        self.ledger.record();
        Ok((self.rank[i] < self.rank[j]) ^ flip(&mut self.rng, self.p))
    }

    /// Renames the items by a fresh uniform permutation `relabel`: item `k` of
    /// the returned oracle is item `relabel[k]` of this one. Any fixed truth
    /// becomes uniformly distributed. Map estimates back with [`map_back`].
    pub fn randomize_labels<R: Rng + ?Sized>(self, rng: &mut R) -> (Self, Permutation) {
        let relabel = sample_uniform_permutation(self.n(), rng);
        let oracle = self.relabeled(&relabel);
        (oracle, relabel)
    }

    pub fn relabeled(self, relabel: &Permutation) -> Self {
        let truth = relabel.inverse().compose(&self.truth);
        Self {
            rank: truth.inverse().0,
            truth,
            ..self
        }
    }

    /// Verification hook: reveals the hidden permutation. Algorithms never call it.
    pub fn disclose_truth(&self) -> &Permutation {
        &self.truth
    }
}

/// Undoes [`ComparisonOracle::randomize_labels`] on an estimate.
pub fn map_back(estimate: &Permutation, relabel: &Permutation) -> Permutation {
    relabel.compose(estimate)
}

/// A noisy search over `n_intervals` sub-intervals. Boundary `b` in
/// `1..n_intervals` answers "does the target lie right of boundary `b`?".
pub trait SearchChannel {
    fn n_intervals(&self) -> usize;

    fn query(&mut self, boundary: usize) -> Result<bool>;

    /// Queries answered so far.
    fn queries_made(&self) -> u64;
}

/// Standalone search channel with a fixed target interval.
#[derive(Debug, Clone)]
pub struct SearchOracle {
    target: usize,
    n_intervals: usize,
    p: CrossoverProb,
    rng: TrialRng,
    ledger: QueryLedger,
}

impl SearchOracle {
    /// `target` is the 1-based interval index `l*`.
    pub fn new(n_intervals: usize, target: usize, p: CrossoverProb, rng: TrialRng) -> Result<Self> {
        if n_intervals < 2 {
            return Err(Error::TooFewIntervals {
                min: 2,
                got: n_intervals,
            });
        }
        if !(1..=n_intervals).contains(&target) {
            return Err(Error::IndexOutOfRange {
                index: target,
                max: n_intervals,
            });
        }
        Ok(Self {
            target,
            n_intervals,
            p,
            rng,
            ledger: QueryLedger::new(),
        })
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn search_query(&mut self, boundary: usize) -> Result<bool> {
        if !(1..self.n_intervals).contains(&boundary) {
            return Err(Error::IndexOutOfRange {
                index: boundary,
                max: self.n_intervals - 1,
            });
        }
        self.ledger.record();
        Ok((boundary < self.target) ^ flip(&mut self.rng, self.p))
    }
}

impl SearchChannel for SearchOracle {
    fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    fn query(&mut self, boundary: usize) -> Result<bool> {
        self.search_query(boundary)
    }

    fn queries_made(&self) -> u64 {
        self.ledger.total()
    }
}
