use thiserror::Error;

use crate::integrator::{SimState, TrajectoryRecord};
use crate::grid::Field;

/// Errors raised across the simulator.
#[derive(Debug, Error)]
pub enum ChdError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },

    /// Zero-mean solvability condition violated (source or Poisson data).
    #[error("compatibility violated: mean {mean:e} exceeds tolerance {tol:e} (data must integrate to zero)")]
    Compatibility { mean: f64, tol: f64 },

    #[error("time {t} outside tabulated range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("unsupported source variant for {0}")]
    UnsupportedVariant(&'static str),

    #[error(transparent)]
    Integration(Box<IntegrationFailure>),

    #[error(transparent)]
    NonConvergence(Box<NonConvergence>),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// A trajectory hit a non-finite or runaway state.
#[derive(Debug, Error)]
#[error("integration failed at t = {t}: {reason}")]
pub struct IntegrationFailure {
    pub t: f64,
    pub reason: String,
    pub last_good: SimState,
    /// Diagnostics gathered before the failure (empty when raised by a single step).
    pub partial: TrajectoryRecord,
}

#[derive(Debug, Error)]
#[error("no convergence by t = {t}: stationarity residual {residual:e} > tol {tol:e}")]
pub struct NonConvergence {
    pub t: f64,
    pub residual: f64,
    pub tol: f64,
    pub best: Field,
}

pub type Result<T> = std::result::Result<T, ChdError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> ChdError {
    ChdError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
