use thiserror::Error;

/// Errors produced by the simulation and estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (relative deviation {deviation:.3e}, tolerance {tolerance:.1e})")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error(
        "steady state is degenerate: second-smallest singular value {second:.3e} \
         is below {threshold:.3e}"
    )]
    DegenerateSteadyState { second: f64, threshold: f64 },

    #[error("propagation time must be non-negative, got {0}")]
    NegativeTime(f64),

    #[error("lag times must be positive, got {0}")]
    NonPositiveLag(f64),

    #[error("number of current factors must be even, got {0}")]
    OddCorrelatorOrder(usize),

    #[error("detector efficiency must lie in [0, 1], got {0}")]
    InvalidEfficiency(f64),

    #[error("state became non-finite at step {step}; dt is likely too large")]
    NonFiniteState { step: usize },

    #[error("record contains no increments")]
    EmptyRecord,

    #[error("lag index {lag} exceeds the usable record length ({max} coarse samples)")]
    LagExceedsRecord { lag: usize, max: usize },

    #[error("coarse lag spacing {delta_tau} is not an integer multiple of the record dt {dt}")]
    LagNotMultipleOfDt { delta_tau: f64, dt: f64 },

    #[error("record dt {record_dt} does not match the requested filter dt {expected}")]
    DtMismatch { record_dt: f64, expected: f64 },

    #[error(
        "correlation function has not decayed at tau_max: \
         |F(tau_max)| / |F(0+)| = {ratio:.3e} exceeds {tolerance:.1e}"
    )]
    InsufficientDecay { ratio: f64, tolerance: f64 },

    #[error("frequency grid truncates the support of dS/dtheta (tail fraction {0:.3e})")]
    TruncatedSupport(f64),

    #[error("Fisher information vanishes at the expansion point")]
    ZeroFisherDenominator,

    #[error("posterior has no support on the parameter grid")]
    EmptyPosteriorSupport,

    #[error("checkpoint {checkpoint} lies outside the record duration {duration}")]
    CheckpointOutOfRange { checkpoint: f64, duration: f64 },

    #[error("closed form requires resonant driving (delta = 0), got delta = {0}")]
    NonZeroDetuning(f64),

    #[error("{0}")]
    InvalidInput(String),

    #[error("too few records: got {got}, need at least {need}")]
    TooFewRecords { got: usize, need: usize },

    #[error("record parse error: {0}")]
    RecordParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
