use thiserror::Error;

/// Errors raised across the forward model, spectral toolkit and probes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid coefficient field: {0}")]
    InvalidCoefficient(String),

    #[error("diffeomorphism construction failed: {0}")]
    Construction(String),

    #[error("singular jacobian at ({x:.6}, {y:.6}): det = {det:e}")]
    SingularJacobian { x: f64, y: f64, det: f64 },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("eigensolver did not converge after {iterations} block steps (worst relative residual {worst_residual:e})")]
    EigenNonConvergence { iterations: usize, worst_residual: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("support violation: {0}")]
    Support(String),

    #[error("neumann series does not contract at |k| = {abs_k}: |r_{step}| = {next:e} >= {prev:e}")]
    KTooSmall {
        abs_k: f64,
        step: usize,
        prev: f64,
        next: f64,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
