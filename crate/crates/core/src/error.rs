use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state norm collapsed to {norm:e}; reduce the time step")]
    NormCollapse { norm: f64 },

    #[error("cannot normalize a zero vector")]
    ZeroVector,

    #[error("Fock truncation inadequate: top-level population {population:e} at t = {time}")]
    TruncationExceeded { population: f64, time: f64 },

    #[error("Liouvillian null space is degenerate (dimension > 1)")]
    DegenerateNullSpace,

    #[error("steady-state extraction ill-conditioned: residual {residual:e}")]
    IllConditioned { residual: f64 },

    #[error("master-equation integration failed at t = {time}: {reason}")]
    IntegrationFailure { time: f64, reason: String },

    #[error("no emission: excited-state population vanishes in the steady state")]
    NoEmission,

    #[error("filter unstable: bandwidth * dt = {product} exceeds 1")]
    FilterUnstable { product: f64 },

    #[error("no bistable pair below threshold epsilon = {threshold}")]
    BelowThreshold { threshold: f64 },

    #[error("configuration error at {location}: {message}")]
    Config { location: String, message: String },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error(transparent)]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
