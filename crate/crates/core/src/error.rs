use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("fractional order {0} outside the admissible range [-1, 1]")]
    OrderOutOfRange(f64),

    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("starting-weight system is singular or ill-conditioned (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("corrected step at k = {index} needs starting values U^1..U^{needed}, history has {available} entries")]
    MissingStartingValues {
        index: usize,
        needed: usize,
        available: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid { .. } | Error::Config(_) | Error::OrderOutOfRange(_) => 1,
            Error::IllConditioned { .. }
            | Error::Factorization(_)
            | Error::NonConvergence(_)
            | Error::MissingStartingValues { .. } => 2,
            Error::Io(_) | Error::Csv(_) => 3,
        }
    }
}
