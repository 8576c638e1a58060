use crate::linalg::OperatorKind;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("site index {site} out of range 1..={n_sites}")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("register of {n_sites} sites exceeds the configured cap of {cap}")]
    RegisterTooLarge { n_sites: usize, cap: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("operator failed its {kind:?} residual check: residual {residual:.3e}")]
    KindResidual { kind: OperatorKind, residual: f64 },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("LAPACK routine {routine} returned info = {info}")]
    Lapack { routine: &'static str, info: i32 },

    #[error("Born probabilities deviate from normalization by {deviation:.3e}")]
    BornNormalization { deviation: f64 },

    #[error("purity {purity} is below the fully-mixed floor 1/D = {floor}")]
    InvalidPurity { purity: f64, floor: f64 },

    #[error("noise scale alpha = {alpha:.3e} too small to rescale")]
    UnrecoverableNoise { alpha: f64 },

    #[error("empty shot set")]
    EmptyShots,

    #[error("PSFF map is missing subset {0}")]
    MissingSubset(String),

    #[error("time {0} is not on the series grid")]
    TimeNotOnGrid(f64),

    #[error("N = {n_sites} too large for exact enumeration (cap {cap})")]
    EnumerationTooLarge { n_sites: usize, cap: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Eigensolver(e.to_string())
    }
}
