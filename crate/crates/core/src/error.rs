use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Variants fall into two families: validation failures (bad input, bad
/// configuration) and numerical failures (non-convergence, domain blow-up).
/// The CLI maps them to exit codes 2 and 3 through [`Error::is_validation`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown kernel family `{0}`")]
    UnknownFamily(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("p = {p:?} lies outside the Hamiltonian domain (bound {bound} along this direction)")]
    DomainViolation { p: Vec<f64>, bound: f64 },
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("operation not supported for {0} tails")]
    UnsupportedTail(&'static str),
    #[error("argument {0} is below the admissible range")]
    BelowRange(f64),
    #[error("kernel is not symmetric; {0}")]
    AsymmetricKernel(&'static str),
    #[error("no shipped symmetric majorant for this kernel")]
    MajorizationUnavailable,
    #[error("CFL violated: dt = {dt}, admissible dt <= {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("truncation half-width {truncation} too small: need at least {required}")]
    TruncationTooSmall { truncation: f64, required: f64 },
    #[error("fields do not share a grid: {0}")]
    GridMismatch(String),
    #[error("need at least {needed} records with distinct R, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("record at R = {0} is saturated")]
    Saturated(f64),
    #[error("discrete comparison violated at x = {x}: u - u_R = {value}")]
    ComparisonViolated { x: f64, value: f64 },
    #[error("table is missing required column `{0}`")]
    MissingColumn(String),
    #[error("empty table")]
    EmptyTable,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::DomainViolation { .. }
                | Error::NonConvergence(_)
                | Error::CflViolation { .. }
                | Error::Saturated(_)
                | Error::ComparisonViolated { .. }
        )
    }

    /// Stable machine-readable tag, used in CLI error records and by the C ABI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnknownFamily(_) => "unknown_family",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DomainViolation { .. } => "domain_violation",
            Error::NonConvergence(_) => "non_convergence",
            Error::UnsupportedTail(_) => "unsupported_tail",
            Error::BelowRange(_) => "below_range",
            Error::AsymmetricKernel(_) => "asymmetric_kernel",
            Error::MajorizationUnavailable => "majorization_unavailable",
            Error::CflViolation { .. } => "cfl_violation",
            Error::TruncationTooSmall { .. } => "truncation_too_small",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::Saturated(_) => "saturated",
            Error::ComparisonViolated { .. } => "comparison_violated",
            Error::MissingColumn(_) => "missing_column",
            Error::EmptyTable => "empty_table",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
