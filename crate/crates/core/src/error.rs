use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid resolution {resolution} m exceeds cell radius {radius} m")]
    DegenerateGrid { resolution: f64, radius: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("too many users for zero-forcing: {users} users, {dimension} spatial dimensions")]
    TooManyUsers { users: usize, dimension: usize },

    #[error("rank-deficient channel matrix: columns {columns:?} are linearly dependent on earlier columns")]
    RankDeficient { columns: Vec<usize> },

    #[error("Gamma scales differ: {0} vs {1}")]
    ScaleMismatch(f64, f64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
