use crate::io::config::ConfigErrors;
use crate::timestep::State;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid size ({nx}, {ny}, {nz}): {reason}")]
    Sizing {
        nx: usize,
        ny: usize,
        nz: usize,
        reason: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("spectral coefficients are not conjugate symmetric (defect {defect:.3e})")]
    SymmetryViolation { defect: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular implicit solve at mode ({k1}, {k2})")]
    SingularSolve { k1: i64, k2: i64 },

    #[error("eigenvalue diagnostic failed: {0}")]
    Eigen(String),

    /// The state left the finite range. `last_valid` is the state before the
    /// failing step.
    #[error("blow-up at step {step} (t = {time}): {reason}")]
    BlowUp {
        step: u64,
        time: f64,
        reason: String,
        last_valid: Box<State>,
    },

    #[error(transparent)]
    Config(#[from] ConfigErrors),

    #[error("corrupt snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
