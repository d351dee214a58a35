use thiserror::Error;

/// Errors shared across the filtering, smoothing, baseline and estimation code.
#[derive(Debug, Error)]
pub enum Error {
    /// Every log weight in a vector is -inf or NaN: the particle cloud has
    /// collapsed and the run cannot continue.
    #[error("all importance weights degenerate at step {step}")]
    AllWeightsDegenerate { step: usize },

    /// A weight vector handed to a sampler is negative or not normalized.
    #[error("invalid weight vector: {reason}")]
    InvalidWeights { reason: String },

    /// Model parameters violate their positivity constraints.
    #[error("invalid model parameters: {reason}")]
    InvalidTheta { reason: String },

    /// Numerical integration or sampling produced NaN/Inf state entries.
    #[error("non-finite state produced at step {step}")]
    NonFiniteState { step: usize },

    /// A conditioning trajectory does not cover the observation window.
    #[error("conditioning trajectory has {got} states, expected {expected}")]
    ConditioningLengthMismatch { expected: usize, got: usize },

    /// Kalman innovation variance is not positive.
    #[error("singular innovation variance at step {step}")]
    SingularInnovation { step: usize },

    /// Ensemble covariance too degenerate for the EnKS analysis update.
    #[error("singular ensemble covariance at step {step}")]
    SingularEnsembleCovariance { step: usize },

    /// Least-squares denominator is zero in the autoregressive M-step.
    #[error("degenerate regressor: all lagged states are zero")]
    DegenerateRegressor,

    /// A complete-data log density evaluated to NaN/Inf.
    #[error("non-finite log density in auxiliary function")]
    NonFiniteLogDensity,

    /// Input sequences disagree in length.
    #[error("length mismatch: {reason}")]
    LengthMismatch { reason: String },

    /// An operation received an empty input it cannot handle.
    #[error("empty input: {reason}")]
    EmptyInput { reason: String },

    /// Experiment configuration is malformed or inconsistent.
    #[error("invalid config: {reason}")]
    InvalidConfig { reason: String },

    /// A stochastic EM run aborted; carries the iteration index.
    #[error("stochastic EM aborted at iteration {iter}: {source}")]
    SemAborted {
        iter: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("history validation failed: {reason}")]
    InvalidHistory { reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
