use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate metric: condition number {condition:.3e} exceeds {limit:.1e}")]
    DegenerateMetric { condition: f64, limit: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {}", .0.join("; "))]
    InvalidInput(Vec<String>),

    #[error(
        "ambiguous distribution dimension: candidates {lower} and {upper} (spectral gap {gap:.3e})"
    )]
    AmbiguousDimension {
        lower: usize,
        upper: usize,
        gap: f64,
    },

    #[error("positivity violated: {0}")]
    Positivity(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("integrator failure: {0}")]
    Integrator(String),

    #[error("internal consistency failure: {0}")]
    InternalConsistency(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(vec![msg.into()])
    }

    /// True for errors caused by the caller's data rather than by a numerical stage.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::InvalidInput(_) | Error::Unsupported(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
