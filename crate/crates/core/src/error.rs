use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch { op: &'static str, expected: String, found: String },

    #[error("non-finite value produced by {0}")]
    NumericOverflow(&'static str),

    #[error("requested time {requested:.6} s is outside the retained window [{oldest:.6}, {newest:.6}] s")]
    WindowUnderflow { requested: f64, oldest: f64, newest: f64 },

    #[error("sample at t = {found:.9} s does not follow the grid (expected t = {expected:.9} s)")]
    OffGrid { expected: f64, found: f64 },

    #[error("{solver} failed after {iterations} iterations (residual {residual:.3e}): {reason}")]
    SolverFailure { solver: &'static str, iterations: usize, residual: f64, reason: String },

    #[error("rank deficient: numerical rank {rank}, required {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("plant construction failed: {0}")]
    Construction(String),

    #[error("least-squares gain lost positive definiteness at t = {t:.6} s")]
    GainNotPositiveDefinite { t: f64 },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }

    pub(crate) fn dims(op: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch { op, expected: expected.to_string(), found: found.to_string() }
    }
}
