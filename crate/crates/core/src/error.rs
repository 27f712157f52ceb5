use thiserror::Error;

use crate::configuration::Configuration;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("index {index} out of range for {len} objects")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("{op} is only available in two dimensions (got d = {dim})")]
    PlanarOnly { op: &'static str, dim: usize },

    #[error("{op} does not support this vessel: {reason}")]
    UnsupportedVessel { op: &'static str, reason: String },

    #[error("configuration is not in the configuration space: {0}")]
    InvalidConfiguration(String),

    #[error("could not place object {index} after {attempts} attempts")]
    PlacementFailed { index: usize, attempts: usize },

    #[error(
        "overlap projection did not converge after {iterations} passes \
         (largest violation {max_violation:.3e})"
    )]
    ProjectionFailed {
        iterations: usize,
        max_violation: f64,
        config: Box<Configuration>,
    },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error(
        "b_max = {b_max} is too small to observe decay: product is still {product:.3e} \
         (tolerance {tolerance:.0e})"
    )]
    DecayNotObserved {
        b_max: f64,
        product: f64,
        tolerance: f64,
    },

    #[error(
        "precondition rho^2 * N * sqrt(12) > 2 - pi/4 (= 1.2146) violated: \
         rho = {rho}, N = {n} gives {value:.4}"
    )]
    ArchimedesPrecondition { rho: f64, n: usize, value: f64 },

    #[error("path certificate failed on segment {segment} at fraction {fraction:.4}")]
    CertificateFailed { segment: usize, fraction: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
