use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpeError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("mode index {index} out of range for {n_points} grid points")]
    Index { index: i64, n_points: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate state: {0}")]
    DegenerateState(String),

    #[error("healing length {healing_length:.3e} not resolved by grid spacing {spacing:.3e}")]
    Resolution { healing_length: f64, spacing: f64 },

    #[error("time step {dt:.3e} exceeds the RK4 stability bound {bound:.3e}")]
    StabilityBound { dt: f64, bound: f64 },

    #[error("non-finite value in RK4 stage {stage} of step {step} (t = {time:.6e})")]
    Divergence { step: u64, stage: usize, time: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("state is not stationary (residual {residual:.3e})")]
    NonStationary { residual: f64 },

    #[error("frequency fit failed: relative residual {relative_residual:.3e}")]
    FitFailure {
        relative_residual: f64,
        /// Sampled series (t, c_plus, conj(c_minus)) the fit was attempted on.
        series: Vec<(f64, num_complex::Complex64, num_complex::Complex64)>,
    },

    #[error("sink error: {0}")]
    Sink(String),

    #[error("too few records: need {needed}, got {got}")]
    TooFewRecords { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, GpeError>;
