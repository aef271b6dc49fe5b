use chrono::NaiveDate;
use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation was handed values that violate its contract.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// A dataset may only describe a single user.
    #[error("dataset mixes user ids: expected {expected:?}, found {found:?}")]
    MixedUsers { expected: String, found: String },

    #[error("duplicate day {0}")]
    DuplicateDay(NaiveDate),

    #[error("too few points: got {got}, need at least {need}")]
    TooFewPoints { got: usize, need: usize },

    /// An iterative fit left the feasible region (e.g. a scale matrix lost
    /// positive definiteness). Reported, never clamped.
    #[error("numerical failure at iteration {iteration}: {detail}")]
    Numerical { iteration: usize, detail: String },

    /// A mixture reduction left nothing behind (e.g. every weight fell
    /// below the floor).
    #[error("degenerate mixture: {0}")]
    DegenerateMixture(String),
}

pub type Result<T> = std::result::Result<T, Error>;
