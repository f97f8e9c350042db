use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spanning set is numerically zero")]
    ZeroSpan,

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rank-deficient tangent space: numerical rank {found} below dimension {expected}")]
    RankDeficient { expected: usize, found: usize },

    #[error("matrix rank {found} exceeds the model rank {limit}")]
    RankExceeded { limit: usize, found: usize },

    #[error("no closed-form coherence for model {0}")]
    NoFormula(String),

    #[error("cannot parse {what}: {detail}")]
    Parse { what: &'static str, detail: String },

    #[error("malformed file at line {line}: {detail}")]
    Malformed { line: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn parse(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Parse {
            what,
            detail: detail.into(),
        }
    }

    /// True for failures caused by the numerics rather than by the input shape.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::RankDeficient { .. } | Error::RankExceeded { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
