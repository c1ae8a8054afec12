use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{routine} did not converge (residual {residual:.3e})")]
    NotConverged { routine: &'static str, residual: f64 },

    #[error("rank deficiency detected at column {column}")]
    RankDeficient { column: usize },

    #[error("non-negative least squares infeasible: best relative residual {residual:.3e} exceeds tolerance {tau:.3e}")]
    Infeasible { residual: f64, tau: f64 },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("matrix is not positive semi-definite (minimum eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },

    #[error("sampled row {row} couples to DoF {dof}, which is missing from the {set} reach set")]
    ReachInconsistent {
        row: usize,
        dof: usize,
        set: &'static str,
    },

    #[error("interpolation matrix is singular (condition number {cond:.3e})")]
    SingularInterpolation { cond: f64 },

    #[error("negative weight {value} at element {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("input eigenvalues are not sorted ascending at position {0}")]
    Unsorted(usize),

    #[error("reduced system is unstable for every positive time step")]
    Unstable,

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed input: {0}")]
    Format(String),
}
