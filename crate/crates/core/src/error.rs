use thiserror::Error;

/// Errors produced by the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A pivot underflowed the singularity tolerance during LU elimination.
    #[error("singular matrix: pivot magnitude {pivot:.3e} below tolerance {tolerance:.3e}")]
    SingularMatrix { pivot: f64, tolerance: f64 },

    /// The eigensolver hit its iteration cap (pathological input).
    #[error("eigensolver failed to converge (info = {info})")]
    ConvergenceFailure { info: i32 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The matrix does not commute with the exchange operator.
    #[error("centrosymmetry violated: max deviation {deviation:.3e} exceeds {tolerance:.3e}")]
    CentrosymmetryViolation { deviation: f64, tolerance: f64 },

    /// A perturbation-theory denominator is too close to zero; the
    /// realization must be rejected rather than trusted.
    #[error("near-degenerate level: |denominator| {denominator:.3e} below {threshold:.3e}")]
    NearDegenerate { denominator: f64, threshold: f64 },

    /// |S_in->out| is numerically zero, so the dwell time is undefined.
    #[error("vanishing scattering amplitude |S| = {amplitude:.3e}; dwell time undefined")]
    VanishingAmplitude { amplitude: f64 },

    #[error("out of domain: {0}")]
    OutOfDomain(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
