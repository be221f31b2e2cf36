use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("mesh parse error at line {line}: {message}")]
    MeshParse { line: usize, message: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("drift evaluation failed on face {face}: {message}")]
    Evaluation { face: usize, message: String },

    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("velocity field is not discretely divergence-free: max cell imbalance {residual:e} exceeds {tolerance:e}")]
    NotIncompressible { residual: f64, tolerance: f64 },

    #[error("generator is not well balanced: ||Q*pi||_inf = {residual:e} exceeds {tolerance:e}")]
    NotWellBalanced { residual: f64, tolerance: f64 },

    #[error("invalid state {state} (chain has {n} states)")]
    InvalidState { state: usize, n: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("steady state did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("spectral gap estimate failed after {iterations} iterations (last |mu2| estimate {mu2_abs})")]
    GapEstimate { iterations: usize, mu2_abs: f64 },

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("probe `{probe}` failed at step {step}: {message}")]
    Probe {
        probe: String,
        step: usize,
        message: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("image error for {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of an iterative method to reach its tolerance.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(self, Error::Convergence { .. } | Error::GapEstimate { .. })
    }

    /// True for errors caused by bad input: configuration, geometry, fields.
    pub fn is_validation_failure(&self) -> bool {
        matches!(
            self,
            Error::InvalidDomain(_)
                | Error::MeshParse { .. }
                | Error::InvalidMesh(_)
                | Error::Evaluation { .. }
                | Error::UnsupportedTopology(_)
                | Error::InvalidParameter(_)
                | Error::InvalidMeasure(_)
                | Error::NotIncompressible { .. }
                | Error::InvalidState { .. }
                | Error::InvalidArgument(_)
                | Error::Config(_)
                | Error::Image { .. }
                | Error::Json(_)
        )
    }
}
