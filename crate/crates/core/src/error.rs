use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the clustering library.
///
/// Case indices and column indices are zero-based.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {0} has no votes")]
    ZeroRowSum(usize),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("cluster count {k} exceeds the exact matching bound {bound}")]
    KTooLarge { k: usize, bound: usize },
    #[error("cluster count {0} is too small for this operation")]
    KTooSmall(usize),
    #[error("not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("every resampling round was degenerate for k = {k}")]
    AllRoundsDegenerate { k: usize },
    #[error("case {0} is not covered by any batch")]
    UncoveredCase(usize),
    #[error("not a probability distribution: {0}")]
    NotADistribution(String),
    #[error("covariance matrix cannot be factorized")]
    DegenerateCovariance,
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("non-finite value at line {line}, column {column}")]
    NonFiniteValue { line: usize, column: usize },
    #[error("division by zero in row {0}")]
    DivisionByZero(usize),
    #[error("column {0} is constant")]
    ConstantColumn(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the input data rather than by configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::NonFiniteValue { .. }
                | Error::DivisionByZero(_)
                | Error::ConstantColumn(_)
                | Error::InvalidData(_)
                | Error::DegenerateCovariance
                | Error::LengthMismatch { .. }
                | Error::Io(_)
        )
    }
}
