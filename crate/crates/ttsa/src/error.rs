use thiserror::Error;

/// Error type shared across the toolkit.
#[derive(Debug, Error)]
pub enum TtsaError {
    /// Operator output (or config vector) has the wrong dimension.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        got: usize,
    },

    /// A declared constant or step-size parameter violates its admissibility
    /// condition.
    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),

    /// Fixed-point iteration failed to reach tolerance.
    #[error("fixed-point iteration did not converge: residual {residual:.3e} after {iterations} sweeps (tol {tol:.3e})")]
    NoConvergence {
        residual: f64,
        iterations: usize,
        tol: f64,
    },

    /// A trajectory produced a non-finite value.
    #[error("numeric blowup at step {step}: {what} has norm {norm}")]
    NumericBlowup { step: u64, what: String, norm: f64 },

    /// Numeric blowup inside an ensemble; carries the offending trial.
    #[error("trial {trial} (seed {seed}) failed: {source}")]
    TrialFailed {
        trial: usize,
        seed: u64,
        #[source]
        source: Box<TtsaError>,
    },

    /// Input domain error for analysis routines.
    #[error("domain error: {0}")]
    Domain(String),

    /// Config file parse or validation failure.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TtsaError>;
