use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("power iteration did not converge after {iterations} iterations (last estimate {estimate})")]
    NotConverged { iterations: usize, estimate: f64 },

    #[error("spectral radius is zero; epidemic threshold undefined")]
    ZeroSpectralRadius,

    #[error("integration failed at t = {t}: non-finite state")]
    IntegrationFailure { t: f64 },

    #[error("instant {0} is outside the valid range or off the sample grid")]
    InvalidInstant(f64),

    #[error("budget {budget} exceeds the maximum adaptation cost {max}")]
    InfeasibleBudget { budget: f64, max: f64 },

    #[error("population of {0} is too small; need at least 4 members")]
    PopulationTooSmall(usize),

    #[error("empty sample")]
    EmptySample,

    #[error("all {0} run(s) failed")]
    AllRunsFailed(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed network file: {0}")]
    NetworkFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error stems from user-supplied configuration rather than a runtime fault.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::Config(_)
                | Error::Json(_)
                | Error::InfeasibleBudget { .. }
                | Error::PopulationTooSmall(_)
                | Error::NetworkFormat(_)
                | Error::DimensionMismatch { .. }
        )
    }
}
