//! Error type shared across the crate.

use std::path::PathBuf;

/// Everything that can go wrong in a simulation or analysis run.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    /// Grid or time-step parameters fail validation.
    #[error("invalid numerical parameters: {0}")]
    InvalidNumerics(String),

    /// Model parameters fail validation.
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    /// The rest-state cubic could not be bracketed and solved.
    #[error("no real rest-state root for beta={beta}, gamma={gamma}")]
    NoRealRoot { beta: f64, gamma: f64 },

    /// A field update produced a non-finite value.
    #[error("field blow-up at step {step}")]
    BlowUp { step: u64 },

    /// The pinning system is rank deficient or hopelessly ill conditioned,
    /// which in practice means the tip has been lost.
    #[error("singular pinning system at step {step} (condition estimate {cond:.3e})")]
    SingularPinning { step: u64, cond: f64 },

    /// No isoline intersection was found when one was required.
    #[error("no tip: the u1 and u2 isolines do not intersect")]
    NoTip,

    /// A classification run was requested on a state whose frame is not
    /// engaged; the velocity record would be all zeros.
    #[error("frame advection is not engaged")]
    NotEngaged,

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    /// A series is too short for the requested analysis.
    #[error("series too short: {0}")]
    TooShort(String),

    /// Two sweeps cannot be compared because their beta grids differ.
    #[error("mismatched sweep ranges: {0}")]
    MismatchedRange(String),

    /// A snapshot file that an experiment depends on does not exist.
    #[error("missing snapshot: {0}")]
    MissingSnapshot(PathBuf),

    /// A run hit its step budget before the motion could be classified.
    #[error("classification unresolved after {steps} steps")]
    Unresolved { steps: u64 },

    /// Malformed snapshot, series or config content.
    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
