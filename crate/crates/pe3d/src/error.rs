//! Error type shared by all solver components.

use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical or numerical parameter failed validation.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The stratification is resonant: H*N/(pi*U0) is an integer, so one
    /// vertical mode would have a vanishing characteristic speed.
    #[error("resonant stratification: H*N/(pi*U0) = {value} is within {tol} of an integer")]
    ResonantStratification { value: f64, tol: f64 },

    /// A vertical sample grid is too coarse for the requested mode.
    #[error(
        "sample grid with {intervals} intervals is too coarse for mode {n} (need >= {needed})"
    )]
    GridTooCoarse {
        intervals: usize,
        n: usize,
        needed: usize,
    },

    /// An operation that only applies to baroclinic modes was asked for mode 0.
    #[error("{0} is not defined for the barotropic mode (n = 0)")]
    BarotropicModeForbidden(&'static str),

    /// A non-finite value was found where finite data is required.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// Array shapes disagree with the grid.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: String,
        expected: String,
        got: String,
    },

    /// The solution became non-finite during time stepping.
    #[error("solution blew up at step {step}: first non-finite value in {field}")]
    BlowUp { step: usize, field: String },

    /// The pressure solve did not reach the requested residual.
    #[error(
        "pressure solve stalled at relative residual {residual:.3e} (tolerance {tolerance:.3e})"
    )]
    PressureSolveStalled { residual: f64, tolerance: f64 },

    /// A boundary trace requested during playback was never recorded.
    #[error("missing boundary trace: step {step}, mode {mode}, {variable} on {line}")]
    MissingTrace {
        step: usize,
        mode: usize,
        variable: String,
        line: String,
    },

    /// Recorded traces are incompatible with the requesting run.
    #[error("trace incompatible with run: {0}")]
    TraceMismatch(String),

    /// A configuration file could not be parsed.
    #[error("config error at line {line}: {reason}")]
    Config { line: usize, reason: String },

    /// A snapshot or series file is malformed.
    #[error("malformed file {path}: {reason}")]
    Malformed { path: String, reason: String },

    /// Wrapped I/O error with the offending path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Attach a path to a raw I/O error.
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
