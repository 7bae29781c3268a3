use thiserror::Error;

/// Errors raised by the numerical kernels, constructions and harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is not Hermitian (relative residual {residual:e})")]
    NotHermitian { residual: f64 },
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix function undefined at eigenvalue {eigenvalue:e}")]
    DomainError { eigenvalue: f64 },
    #[error("Taylor series diverges: r = {r} >= 1")]
    SeriesDiverges { r: f64 },
    #[error("Taylor order {max_order} too small for tolerance {tol:e} (needs {needed})")]
    TaylorOrderInsufficient { tol: f64, max_order: usize, needed: usize },
    #[error("ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("channel is not KMS detailed balanced (residual {residual:e})")]
    NotDetailedBalanced { residual: f64 },
    #[error("superoperator eigenvalue {worst} outside [0, 1]")]
    SpectrumOutOfRange { worst: f64 },
    #[error("spectral gap {gap:e} too small")]
    GapTooSmall { gap: f64 },
    #[error("alias regime violated: 2pi/dt = {a} must exceed {b}")]
    AliasRegimeViolated { a: f64, b: f64 },
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("rejection operator not PSD (eigenvalue {eigenvalue:e})")]
    RejectionNotPsd { eigenvalue: f64 },
    #[error("not trace preserving (residual {residual:e})")]
    NotTracePreserving { residual: f64 },
    #[error("branch probability {prob:e} below floor")]
    BranchProbabilityZero { prob: f64 },
    #[error("all branch probabilities degenerate")]
    BranchProbabilityDegenerate,
    #[error("Kraus set too large: {count} operators")]
    KrausExplosion { count: usize },
    #[error("enumeration too large: {count} sequences")]
    TooLarge { count: f64 },
    #[error("state is not stationary for the instrument (residual {residual:e})")]
    NotStationary { residual: f64 },
    #[error("outcome variance {var:e} is degenerate")]
    DegenerateVariance { var: f64 },
    #[error("centered measurement map is not KMS detailed balanced (residual {residual:e})")]
    CenteredMapNotDb { residual: f64 },
    #[error("operator norm {norm} exceeds 1")]
    NormTooLarge { norm: f64 },
    #[error("all LCU coefficients vanish")]
    DegenerateCoefficients,
    #[error("block encoding dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
