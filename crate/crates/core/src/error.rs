use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("{0} diverges (infinite result)")]
    Infinite(&'static str),

    #[error("no repetition count up to {cap} reaches delta = {delta} at p = {p}")]
    BetaUnreachable { p: f64, delta: f64, cap: u32 },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("Lehmer entry {index} = {value} exceeds bound {bound}")]
    InvalidLehmer {
        index: usize,
        value: usize,
        bound: usize,
    },

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("cannot compare item {0} with itself")]
    SelfComparison(usize),

    #[error("at least {min} intervals are required, got {got}")]
    TooFewIntervals { min: usize, got: usize },

    #[error("response has zero likelihood under the current posterior")]
    ImpossibleResponse,

    #[error("variable-length search exceeded its safety cap of {cap} queries")]
    SafetyCap { cap: u64 },

    #[error("per-insertion query budget is zero (rate {rate} too large for n = {n})")]
    ZeroBudget { rate: f64, n: usize },

    #[error("query budget {budget} is below 3 * beta = {min}")]
    BudgetBelowMinimum { budget: u64, min: u64 },

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] IoError),
}

/// `std::io::Error` is neither `Clone` nor `PartialEq`; keep its rendering.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct IoError(pub String);

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(IoError(e.to_string()))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
