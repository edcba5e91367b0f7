use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("calibration clouds are degenerate: centroid distance {distance:e}")]
    DegenerateClouds { distance: f64 },

    #[error("ground and excited responses are indistinguishable for qubit `{0}`")]
    Indistinguishable(String),

    #[error("mixture fit diverged: {0}")]
    FitDiverged(String),

    #[error("grid resolution must be at least 3 points, got {0}")]
    InvalidResolution(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("exact joint inference supports at most 2 qubits, got {0}; use the pairwise estimator")]
    TooManyQubits(usize),

    #[error("pair mass violation: rho_i + rho_j = {pair}, free mass = {free}")]
    MassViolation { pair: f64, free: f64 },

    #[error("active set has fewer than two states")]
    NoActivePairs,

    #[error("counts are empty")]
    EmptyCounts,

    #[error("response densities do not cross between the main means")]
    NoCrossing,

    #[error("confusion matrix is singular (condition number {condition:e})")]
    SingularMatrix { condition: f64 },

    #[error("theta grid mismatch: {0}")]
    GridMismatch(String),

    #[error("qubit mismatch: {0}")]
    QubitMismatch(String),

    #[error("qubit `{qubit}` has no {prepared} calibration shots")]
    MissingBlock { qubit: String, prepared: &'static str },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    ///
    /// Numerical failures map to 3; everything else is an input or
    /// validation problem and maps to 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::FitDiverged(_)
            | Error::SingularMatrix { .. }
            | Error::NoCrossing
            | Error::DegenerateClouds { .. }
            | Error::Indistinguishable(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
