use thiserror::Error;

/// Errors raised by the numerical routines, designers and estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (asymmetry {defect:.3e} relative to norm)")]
    NotHermitian { defect: f64 },

    #[error(
        "matrix is not positive semidefinite (eigenvalue {eigenvalue:.3e}, largest {largest:.3e})"
    )]
    NotPsd { eigenvalue: f64, largest: f64 },

    #[error("matrix has numerical rank {rank} but {cols} columns are required")]
    RankDeficient { rank: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("quadrature result is not Hermitian (defect {defect:.3e})")]
    QuadratureUnstable { defect: f64 },

    #[error("no channel samples supplied")]
    EmptySampleSet,

    #[error("Gram-plus-noise matrix is singular at eta = {eta}")]
    DegenerateGram { eta: f64 },

    #[error("{n_rf} RF chains requested but only {n_r} receive eigenvectors exist")]
    TooManyChains { n_rf: usize, n_r: usize },

    #[error("analog combiner Gram matrix A^H A is singular")]
    SingularGram,

    #[error("digital combiner is singular (condition number {condition:.3e})")]
    SingularDigital { condition: f64 },

    #[error("innovation covariance X^H Sigma X + Xi is singular")]
    SingularInnovation,

    #[error("noise covariance is singular")]
    SingularNoise,

    #[error("least squares needs {needed} independent observations, got {available}")]
    Underdetermined { needed: usize, available: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
