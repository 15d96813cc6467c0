use thiserror::Error;

/// Errors raised by the probability model, the learners, the oracles and the harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate vector: norm is zero")]
    DegenerateVector,

    #[error("degenerate projection: input is orthogonal to every measurement direction")]
    DegenerateProjection,

    #[error("degenerate subspace: weight matrix is rank deficient")]
    DegenerateSubspace,

    #[error("degenerate output energy: y'y = 0")]
    DegenerateOutputEnergy,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("eigensolver did not converge within {0} sweeps")]
    NoConvergence(usize),

    #[error("learner diverged at iteration {iteration}")]
    LearnerDiverged { iteration: u64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}
