use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A large-scale fading matrix was too ill-conditioned to invert.
    #[error("matrix for pilot index {k} is singular (condition number {condition:.3e})")]
    SingularMatrix { k: usize, condition: f64 },

    #[error("{skipped} of {total} network draws were singular (limit is 10%)")]
    TooManySingular { skipped: usize, total: usize },

    #[error("parse error: {0}")]
    Parse(String),
}
