use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Jacobi exponent {0}: must exceed -0.999")]
    InvalidAlpha(f64),

    #[error("product measure needs at least one marginal")]
    EmptyMeasure,

    #[error("quadrature order must be at least 1")]
    InvalidQuadratureOrder,

    #[error("recurrence only available to degree {available}, requested {requested}")]
    DegreeOutOfRange { requested: usize, available: usize },

    #[error("eigen-solve of the Jacobi matrix did not converge")]
    EigenSolveFailed,

    #[error("index set exceeds the member limit of {limit}")]
    IndexSetTooLarge { limit: usize },

    #[error("invalid index set spec: {0}")]
    InvalidIndexSpec(String),

    #[error("malformed index set text at line {line}: {reason}")]
    IndexSetParse { line: usize, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("all features vanish at this input; optimal weight undefined")]
    VanishingFeatures,

    #[error("induced column for degree {degree} sums to {sum}, quadrature order too small")]
    InducedNormalization { degree: usize, sum: f64 },

    #[error("quadrature order {q} too small for degree {degree}")]
    InsufficientQuadrature { q: usize, degree: usize },

    #[error("feature matrix is rank deficient: numerical rank {rank} of {cols}")]
    RankDeficient { rank: usize, cols: usize },

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("non-finite solver state at step {step}")]
    BlowUp { step: usize },

    #[error("invalid solver config: {0}")]
    InvalidConfig(String),

    #[error("basis kind not supported here: {0}")]
    UnsupportedBasis(String),
}

pub type Result<T> = std::result::Result<T, Error>;
