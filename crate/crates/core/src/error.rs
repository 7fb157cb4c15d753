use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error in {op}: argument {value} is outside the admissible range")]
    Domain { op: &'static str, value: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("principal-branch violation at recursion level {level} for xi = {xi}: Re(1 + u) = {re}")]
    BranchViolation { level: usize, xi: f64, re: f64 },

    #[error("derivative of the symbol is singular at xi = {xi}")]
    Singularity { xi: f64 },

    #[error("period sum did not converge after {k_used} periods (partial value {value}, err_est {err_est})")]
    NoConvergence { value: f64, err_est: f64, k_used: usize },

    #[error("integral diverges: geometric panels stopped contracting after {panels} panels (last ratio {ratio})")]
    Divergence { panels: usize, ratio: f64 },

    #[error("quadrature tolerance not met: value {value}, err_est {err_est}")]
    ToleranceNotMet { value: f64, err_est: f64 },

    #[error("truncated integral did not stabilize under extent doubling up to {extent} (last change {change})")]
    NotStabilized { extent: f64, change: f64 },

    #[error("insufficient coverage: regime {regime} has {count} samples, need at least {needed}")]
    InsufficientCoverage { regime: &'static str, count: usize, needed: usize },

    #[error("symbol {0} is not real and symmetric")]
    NotSymmetric(String),

    #[error("envelope constants missing: {0}")]
    EnvelopeConstantsMissing(String),

    #[error("convolution grid too coarse: error estimate {err_est} exceeds tolerance {tol}")]
    GridTooCoarse { err_est: f64, tol: f64 },

    #[error("|x| = {x} is below the density grid floor {floor} and no envelope fit is available")]
    BelowFloor { x: f64, floor: f64 },

    #[error("failed to parse symbol specification {spec:?}: {reason}")]
    Parse { spec: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
