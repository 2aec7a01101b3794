use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("not a bijection: {0}")]
    NotABijection(String),
    #[error("index {index} out of range 1..={bound}")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("empty index set")]
    EmptyIndexSet,
    #[error("order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("order {0} too small (need at least 2)")]
    OrderTooSmall(usize),
    #[error("subset of size {m} requested from {n} elements")]
    SubsetTooLarge { n: usize, m: usize },
    #[error("property has no member of order {0}")]
    EmptyPropertyAtOrder(usize),
    #[error("order {order} exceeds brute-force guard {guard}")]
    OrderTooLargeForBruteForce { order: usize, guard: usize },
    #[error("enumeration of {count} items exceeds cap {cap}")]
    CapExceeded { count: String, cap: u64 },
    #[error("search budget of {0} nodes exhausted")]
    BudgetExhausted(u64),
    #[error("branching exceeds node cap {0}")]
    NodeCapExceeded(usize),
    #[error("invalid dimensions: {0}")]
    DimensionError(String),
    #[error("no dense cell in column {0}")]
    NoDenseCell(usize),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("internal contradiction: {0}")]
    InternalContradiction(String),
    #[error("tree built for k = {tree_k}, constants need k = {needed_k}")]
    TreeMismatch { tree_k: usize, needed_k: String },
    #[error("sample size {sample} exceeds order {order}")]
    SampleTooLarge { sample: usize, order: usize },
    #[error("witness cell ({column}, {row}) is empty")]
    EmptyWitnessCell { column: usize, row: usize },
    #[error("repair indices not strictly increasing at x = {0}")]
    NonMonotoneZ(usize),
    #[error("no permutation at distance >= {epsilon} found in {attempts} attempts")]
    AttemptCapExceeded { epsilon: String, attempts: u64 },
    #[error("constant out of computable range: {0}")]
    ConstantOutOfRange(String),
    #[error("experiment point {point}: {source}")]
    AtPoint { point: usize, source: Box<Error> },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
