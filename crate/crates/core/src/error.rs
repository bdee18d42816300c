use thiserror::Error;

/// Errors raised by problem construction, solvers and the benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A problem definition violates one of its structural invariants.
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    /// A caller passed arguments that break an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),
    /// The objective could not be evaluated where a finite value is required.
    #[error("evaluation failure: {0}")]
    Evaluation(String),
    /// A configuration, suite or record file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
