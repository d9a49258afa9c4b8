//! Noisy binary search: fixed-length and variable-length posterior search,
//! and the backtracking tree walk.

use rand::Rng;

use crate::error::{Error, Result};
use crate::info::{binary_entropy, CrossoverProb};
use crate::oracle::SearchChannel;
use crate::posterior::{bz_alpha, choose_query_fixed, choose_query_variable, PosteriorState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    BudgetExhausted,
    ThresholdCrossed,
    WalkComplete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    /// 1-based estimated interval.
    pub l_hat: usize,
    pub queries_used: u64,
    pub terminated_by: Termination,
    pub final_posterior: Option<PosteriorState>,
}

fn interval_count<C: SearchChannel + ?Sized>(chan: &C) -> Result<usize> {
    let n = chan.n_intervals();
    if n < 2 {
        return Err(Error::TooFewIntervals { min: 2, got: n });
    }
    Ok(n)
}

/// Fixed-length search: exactly `m_budget` queries, then the posterior argmax.
pub fn bz_fixed<C, R>(
    chan: &mut C,
    m_budget: u64,
    p: CrossoverProb,
    rng: &mut R,
) -> Result<SearchOutcome>
where
    C: SearchChannel + ?Sized,
    R: Rng + ?Sized,
{
    let n = interval_count(chan)?;
    let start = chan.queries_made();
    let mut state = PosteriorState::uniform(n, bz_alpha(p), p)?;
    for _ in 0..m_budget {
        let choice = choose_query_fixed(&state.median_split(), rng);
        let y = chan.query(choice.j_star)?;
        state.update(choice.j_star, y)?;
    }
    Ok(SearchOutcome {
        l_hat: state.argmax(),
        queries_used: chan.queries_made() - start,
        terminated_by: Termination::BudgetExhausted,
        final_posterior: Some(state),
    })
}

/// Expected-query bound for the variable-length search:
/// `(log n - log pe + log((1-p)/p)) / (1 - H(p))`, all logs base 2.
pub fn variable_query_bound(n_intervals: usize, pe: f64, p: CrossoverProb) -> Result<f64> {
    let p = p.get();
    if p == 0.0 {
        return Err(Error::Infinite("variable-length query bound at p = 0"));
    }
    let num = (n_intervals as f64).log2() - pe.log2() + ((1.0 - p) / p).log2();
    Ok(num / (1.0 - binary_entropy(p)?))
}

/// Hard cap on variable-length queries: 100x the expected-query bound, or
/// `100 (ceil(log2 n) + 1)` when the channel is noiseless.
pub fn safety_cap(n_intervals: usize, pe: f64, p: CrossoverProb) -> Result<u64> {
    if p.is_noiseless() {
        let depth = (n_intervals as f64).log2().ceil() as u64;
        return Ok(100 * (depth + 1));
    }
    Ok((100.0 * variable_query_bound(n_intervals, pe, p)?).ceil() as u64)
}

/// Variable-length search: query until some interval's log-odds reaches
/// `-log2(pe_target)`.
pub fn bz_variable<C, R>(
    chan: &mut C,
    pe_target: f64,
    p: CrossoverProb,
    rng: &mut R,
) -> Result<SearchOutcome>
where
    C: SearchChannel + ?Sized,
    R: Rng + ?Sized,
{
    if !(pe_target > 0.0 && pe_target < 0.5) {
        return Err(Error::Domain {
            name: "pe_target",
            value: pe_target,
            domain: "(0, 1/2)",
        });
    }
    let n = interval_count(chan)?;
    let start = chan.queries_made();
    let cap = safety_cap(n, pe_target, p)?;
    let threshold = -pe_target.log2();
    let mut state = PosteriorState::bayes(n, p)?;
    let mut used = 0u64;
    while state.max_log_odds() < threshold {
        if used >= cap {
            return Err(Error::SafetyCap { cap });
        }
        let choice = choose_query_variable(&state.median_split(), p, rng);
        let y = chan.query(choice.j_star)?;
        state.update(choice.j_star, y)?;
        used += 1;
    }
    Ok(SearchOutcome {
        l_hat: state.argmax(),
        queries_used: chan.queries_made() - start,
        terminated_by: Termination::ThresholdCrossed,
        final_posterior: Some(state),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NstParams {
    pub beta: u32,
    pub s: u64,
}

impl NstParams {
    pub fn new(m_budget: u64, beta: u32) -> Result<Self> {
        if beta == 0 {
            return Err(Error::Domain {
                name: "beta",
                value: 0.0,
                domain: "positive integers",
            });
        }
        let min = 3 * beta as u64;
        if m_budget < min {
            return Err(Error::BudgetBelowMinimum {
                budget: m_budget,
                min,
            });
        }
        Ok(Self {
            beta,
            s: m_budget.div_ceil(min),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct TreeNode {
    lo: usize,
    hi: usize,
    parent: usize,
    children: Option<(usize, usize)>,
}

/// A node of the extended tree: a node of the split tree, or, for leaves,
/// the `chain_depth`-th node of the chain hanging below it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeRef {
    pub node: usize,
    pub chain_depth: u64,
}

/// Split tree over `(0, n)` where `(i, j)` has children `(i, ceil((i+j)/2))`
/// and `(ceil((i+j)/2), j)`, with a length-`s` chain below every leaf.
/// Chain nodes are implicit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedTree {
    nodes: Vec<TreeNode>,
    n_intervals: usize,
    s: u64,
}

pub fn build_extended_tree(n_intervals: usize, s: u64) -> Result<ExtendedTree> {
    if n_intervals < 2 {
        return Err(Error::TooFewIntervals {
            min: 2,
            got: n_intervals,
        });
    }
    if s == 0 {
        return Err(Error::Domain {
            name: "s",
            value: 0.0,
            domain: "positive integers",
        });
    }
    let mut nodes = vec![TreeNode {
        lo: 0,
        hi: n_intervals,
        parent: 0,
        children: None,
    }];
    let mut stack = vec![0];
    while let Some(k) = stack.pop() {
        let (lo, hi) = (nodes[k].lo, nodes[k].hi);
        if hi - lo < 2 {
            continue;
        }
        let mid = (lo + hi).div_ceil(2);
        let (l, r) = (nodes.len(), nodes.len() + 1);
        nodes.push(TreeNode {
            lo,
            hi: mid,
            parent: k,
            children: None,
        });
        nodes.push(TreeNode {
            lo: mid,
            hi,
            parent: k,
            children: None,
        });
        nodes[k].children = Some((l, r));
        stack.extend([l, r]);
    }
    Ok(ExtendedTree {
        nodes,
        n_intervals,
        s,
    })
}

impl ExtendedTree {
    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    pub fn chain_len(&self) -> u64 {
        self.s
    }

    pub fn root(&self) -> NodeRef {
        NodeRef {
            node: 0,
            chain_depth: 0,
        }
    }

    /// Number of nodes in the split tree (chains excluded).
    pub fn tree_size(&self) -> usize {
        self.nodes.len()
    }

    pub fn label(&self, at: NodeRef) -> (usize, usize) {
        let node = &self.nodes[at.node];
        (node.lo, node.hi)
    }

    pub fn is_leaf(&self, at: NodeRef) -> bool {
        self.nodes[at.node].children.is_none()
    }

    /// Parent in the extended tree; the root is its own parent.
    pub fn parent(&self, at: NodeRef) -> NodeRef {
        if at.chain_depth > 0 {
            NodeRef {
                chain_depth: at.chain_depth - 1,
                ..at
            }
        } else {
            NodeRef {
                node: self.nodes[at.node].parent,
                chain_depth: 0,
            }
        }
    }

    /// Children of a split node, or the next chain node below a leaf
    /// (`None` at the end of a chain).
    pub fn children(&self, at: NodeRef) -> Vec<NodeRef> {
        match self.nodes[at.node].children {
            Some((l, r)) => vec![
                NodeRef {
                    node: l,
                    chain_depth: 0,
                },
                NodeRef {
                    node: r,
                    chain_depth: 0,
                },
            ],
            None if at.chain_depth < self.s => vec![NodeRef {
                chain_depth: at.chain_depth + 1,
                ..at
            }],
            None => vec![],
        }
    }

    pub fn leaves(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<_> = self
            .nodes
            .iter()
            .filter(|n| n.children.is_none())
            .map(|n| (n.lo, n.hi))
            .collect();
        out.sort_unstable();
        out
    }

    /// Depth of the split tree (root at depth 0).
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        for k in 1..self.nodes.len() {
            depth[k] = depth[self.nodes[k].parent] + 1;
        }
        depth.into_iter().max().unwrap_or(0)
    }
}

fn majority_ones<C: SearchChannel + ?Sized>(
    chan: &mut C,
    boundary: usize,
    beta: u32,
) -> Result<u32> {
    let mut ones = 0;
    for _ in 0..beta {
        ones += chan.query(boundary)? as u32;
    }
    Ok(ones)
}

/// Tree walk with `s = ceil(m_budget / (3 beta))` steps. Each endpoint check
/// and each descent uses a `beta`-fold majority vote.
pub fn nst_search<C: SearchChannel + ?Sized>(
    chan: &mut C,
    m_budget: u64,
    beta: u32,
) -> Result<SearchOutcome> {
    nst_walk(chan, m_budget, beta, None)
}

/// [`nst_search`] that also returns the visited nodes (the start node first).
pub fn nst_search_traced<C: SearchChannel + ?Sized>(
    chan: &mut C,
    m_budget: u64,
    beta: u32,
) -> Result<(SearchOutcome, ExtendedTree, Vec<NodeRef>)> {
    let n = interval_count(chan)?;
    let params = NstParams::new(m_budget, beta)?;
    let tree = build_extended_tree(n, params.s)?;
    let mut trace = Vec::new();
    let outcome = nst_walk(chan, m_budget, beta, Some(&mut trace))?;
    Ok((outcome, tree, trace))
}

fn nst_walk<C: SearchChannel + ?Sized>(
    chan: &mut C,
    m_budget: u64,
    beta: u32,
    mut trace: Option<&mut Vec<NodeRef>>,
) -> Result<SearchOutcome> {
    let n = interval_count(chan)?;
    let params = NstParams::new(m_budget, beta)?;
    let tree = build_extended_tree(n, params.s)?;
    let start = chan.queries_made();
    let half = beta.div_ceil(2);
    let mut at = tree.root();
    if let Some(t) = trace.as_deref_mut() {
        t.push(at);
    }
    for _ in 0..params.s {
        let (i, j) = tree.label(at);
        let left_ok = i == 0 || majority_ones(chan, i, beta)? >= half;
        let right_ok = left_ok && (j == n || majority_ones(chan, j, beta)? < half);
        at = if !(left_ok && right_ok) {
            tree.parent(at)
        } else if let Some((l, r)) = tree.nodes[at.node].children {
            let mid = tree.nodes[r].lo;
            let go_right = majority_ones(chan, mid, beta)? >= half;
            NodeRef {
                node: if go_right { r } else { l },
                chain_depth: 0,
            }
        } else {
            NodeRef {
                chain_depth: (at.chain_depth + 1).min(tree.s),
                ..at
            }
        };
        if let Some(t) = trace.as_deref_mut() {
            t.push(at);
        }
    }
    Ok(SearchOutcome {
        l_hat: tree.label(at).0 + 1,
        queries_used: chan.queries_made() - start,
        terminated_by: Termination::WalkComplete,
        final_posterior: None,
    })
}
