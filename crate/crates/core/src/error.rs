use thiserror::Error;

/// Errors produced by set operations, learning, and estimation.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Argument outside its documented range (e.g. reduction order < 1).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A matrix that must have full (numerical) rank does not. For the
    /// learning phase this usually means the training data is not
    /// persistently exciting.
    #[error("rank deficient: {0}")]
    RankDeficient(String),

    /// The interval enclosure blew up: the data interval is too wide for a
    /// rigorous pseudoinverse bound. More or less noisy training data is
    /// needed.
    #[error("interval inflation failed: {0}")]
    Inflation(String),

    /// A constrained-zonotope intersection came out empty, which means a
    /// measurement is inconsistent with the declared noise bounds.
    #[error("empty set: {0}")]
    EmptySet(String),

    /// Internal numerical failure (LP solver, singular innovation, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Scenario configuration rejected before running.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
