use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("fractional order must lie in (0, 1], got {0}")]
    InvalidOrder(f64),

    #[error("time level must be at least 1, got {0}")]
    InvalidLevel(usize),

    #[error("right-sided operator needs 1 <= n <= N, got n = {n}, N = {big_n}")]
    LevelOutOfRange { n: usize, big_n: usize },

    #[error("expected {expected} samples, got {got}")]
    SampleCount { expected: usize, got: usize },

    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),

    #[error("unsupported grid: dimension {dim}, cells per axis {cells}")]
    InvalidGrid { dim: usize, cells: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("entropic parameter must be positive and finite, got {0}")]
    InvalidGamma(f64),

    #[error("proximal step size must be positive, got {0}")]
    InvalidSigma(f64),

    #[error("{solver} did not converge in {iterations} iterations (last violation {violation:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        violation: f64,
    },

    #[error("step {level} failed: {source}")]
    StepFailed {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("study cell alpha = {alpha}, N = {steps} failed: {source}")]
    CellFailed {
        alpha: f64,
        steps: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable snake_case tag for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidOrder(_) => "invalid_order",
            Error::InvalidLevel(_) => "invalid_level",
            Error::LevelOutOfRange { .. } => "level_out_of_range",
            Error::SampleCount { .. } => "sample_count",
            Error::InvalidTimeStep(_) => "invalid_time_step",
            Error::InvalidGrid { .. } => "invalid_grid",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::InvalidDensity(_) => "invalid_density",
            Error::InvalidGamma(_) => "invalid_gamma",
            Error::InvalidSigma(_) => "invalid_sigma",
            Error::NotConverged { .. } => "not_converged",
            Error::StepFailed { .. } => "step_failed",
            Error::CellFailed { .. } => "cell_failed",
            Error::TimeOutOfRange { .. } => "time_out_of_range",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Parse(_) => "parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
