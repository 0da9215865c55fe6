//! Error type shared by all analysis stages.

use thiserror::Error;

/// Errors surfaced by model construction, identification and the
/// entropy-rate / OIR pipelines.
///
/// Per-time-step failures inside series computations are not returned as
/// `Err`; they become unavailable entries carrying one of these values as
/// the reason (see [`crate::oir::StepFailure`]).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A covariance matrix that must be symmetric positive definite is not
    /// (its Cholesky factorization failed).
    #[error("covariance matrix is not positive definite ({context})")]
    CovarianceNotPd { context: &'static str },

    /// The series is too short for the requested model order.
    #[error("insufficient length: {t_len} samples cannot support order {p}")]
    InsufficientLength { t_len: usize, p: usize },

    /// A parameter is outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(alloc::string::String),

    /// Input data contains a NaN or infinity.
    #[error("non-finite input at realization {r}, channel {channel}, sample {t}")]
    NonFiniteInput { r: usize, channel: usize, t: usize },

    /// The normal equations of the RLS recursion are singular at a step,
    /// even after ridge initialization.
    #[error("singular normal equations at time step {t}")]
    SingularNormalEquations { t: usize },

    /// The model is unstable at a step, so no stationary covariance exists.
    #[error("no stationary solution at time step {t}: companion matrix has an eigenvalue with modulus >= 1")]
    NoStationarySolution { t: usize },

    /// The Lyapunov fixed point did not converge and the direct solve failed.
    #[error("lagged-covariance solver failed at time step {t}")]
    LyapunovFailure { t: usize },

    /// The block-Toeplitz system of a restricted model is singular.
    #[error("singular block-Toeplitz system for restricted model of order {q}")]
    SingularSystem { q: usize },

    /// A derived residual covariance lost positive definiteness.
    #[error("numeric degeneracy: derived innovation covariance is not positive definite")]
    NumericDegeneracy,

    /// The coefficient polynomial is singular at a grid frequency.
    #[error("spectral singularity at normalized frequency {omega}")]
    SpectralSingularity { omega: f64 },

    /// A pruned PSD block is not Hermitian positive definite at a frequency.
    #[error(
        "spectral degeneracy at normalized frequency {omega}: PSD block is not positive definite"
    )]
    SpectralDegeneracy { omega: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;
