use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {term}")]
    NonFinite { term: &'static str },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The β doubling loop hit its cap without satisfying the acceptance test.
    /// Usually means the smoothness assumptions are violated or the inner
    /// solves are too inexact.
    #[error(
        "line search failed at iteration {iteration} (block {block}): beta = {beta:e} after \
         {doublings} doublings, last trial phi = {trial_phi:e}, reference = {reference:e}, \
         inner residual = {inner_residual:e}"
    )]
    LineSearch {
        iteration: usize,
        block: usize,
        beta: f64,
        doublings: usize,
        trial_phi: f64,
        reference: f64,
        inner_residual: f64,
    },

    #[error("stationarity measure unsupported for this regularizer")]
    UnsupportedMeasure,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by user input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidPartition(_)
                | Error::Shape { .. }
                | Error::Config(_)
                | Error::Parse { .. }
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
