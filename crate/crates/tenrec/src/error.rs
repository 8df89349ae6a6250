use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("quadrature order {q} out of range (1..={max})")]
    QuadratureOrderOutOfRange { q: usize, max: usize },

    #[error("polynomial degree {degree} exceeds cap {max}")]
    DegreeExceedsCap { degree: usize, max: usize },

    #[error("invalid parameter space: {0}")]
    InvalidParameterSpace(String),

    #[error("basis of {count} multi-indices exceeds cap {cap}")]
    BasisTooLarge { count: u128, cap: u128 },

    #[error("dimension {dim}: quadrature order {q} under-resolves polynomial order {order} (need q >= order + 1)")]
    UnderResolvedQuadrature { dim: usize, q: usize, order: usize },

    #[error("grid index {index:?} out of bounds for grid dims {dims:?}")]
    IndexOutOfBounds { index: Vec<usize>, dims: Vec<usize> },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid sample set: {0}")]
    InvalidSampleSet(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid of {size} entries too large to materialize (cap {cap})")]
    GridTooLarge { size: String, cap: u64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{row}: {reason}")]
    MalformedRow {
        path: String,
        row: usize,
        reason: String,
    },

    #[error("results file {path}: {0}", .reason)]
    ResultsMismatch { path: String, reason: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
