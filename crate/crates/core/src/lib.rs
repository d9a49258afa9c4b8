//! Noisy sorting and searching over a binary symmetric comparison channel.
//!
//! Every comparison answer is flipped independently with probability `p`.
//! The crate provides posterior-based and tree-walk searchers, the
//! insertion sorters built from them, closed-form rate bounds, and a seeded
//! Monte Carlo harness.

pub mod error;
pub mod harness;
pub mod info;
pub mod oracle;
pub mod posterior;
pub mod rng;
pub mod search;
pub mod sorter;

pub use error::{Error, Result};
pub use harness::{
    run_experiment, verify_suite, AggregateResult, Algorithm, ExperimentConfig, Scope, TruthSource,
    VerifyReport,
};
pub use info::{rate_bounds, CrossoverProb, RatePoint};
pub use oracle::{
    lehmer_decode, lehmer_encode, sample_uniform_permutation, ComparisonOracle, LehmerCode,
    Permutation, QueryLedger, SearchChannel, SearchOracle,
};
pub use posterior::{LogOdds, MedianSplit, PosteriorState, QueryChoice};
pub use search::{
    bz_fixed, bz_variable, nst_search, ExtendedTree, NodeRef, NstParams, SearchOutcome, Termination,
};
pub use sorter::{sort_fixed, sort_nst, sort_variable, SortBudget, SortOutcome, SortedPrefix};
