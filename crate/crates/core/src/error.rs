use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
    #[error("input pair (x={x}, y={y}) missing from data")]
    MissingInputPair { x: usize, y: usize },
    #[error("input distribution lacks full support")]
    IncompleteSupport,
    #[error("box is not permutation invariant")]
    NotPermutationInvariant,
    #[error("precondition violated: {reason} (requires n >= {required_n})")]
    Precondition { reason: String, required_n: u64 },
    #[error("linear program is {0}")]
    Solver(String),
    #[error("no feasible point: {0}")]
    Infeasible(String),
    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
