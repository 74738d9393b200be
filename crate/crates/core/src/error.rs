use thiserror::Error;

/// Errors raised by the sparse PC toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cardinality of the total-order set overflows for p={p}, d={d}")]
    CardinalityOverflow { p: usize, d: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("column {column} is linearly dependent on the current support")]
    RankDeficient { column: usize },

    #[error("column {column} has zero norm")]
    ZeroColumn { column: usize },

    #[error("Jacobi eigensolver did not converge in {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },

    #[error("diffusion coefficient {value} is not positive at x = {x}")]
    NonPositiveCoefficient { x: f64, value: f64 },

    #[error("stiffness matrix is singular or not positive definite")]
    SingularSystem,

    #[error(
        "tensor quadrature needs {nodes} nodes (limit {limit}); use Monte Carlo projection instead"
    )]
    QuadratureBudget { nodes: f64, limit: f64 },

    #[error("cross-validation failed: every grid point was excluded")]
    CrossValidationFailed,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
