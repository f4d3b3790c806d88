use thiserror::Error;

use crate::geometry::ResidualKind;
use crate::lp::LpError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gauge error: {0}")]
    Gauge(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("ordered weights must be non-increasing and nonnegative (position {0})")]
    NonMonotoneWeights(usize),
    #[error("residual kind {0:?} has no exact optimization encoding")]
    UnsupportedResidual(ResidualKind),
    #[error("objective preset does not match the requested variant: {0}")]
    WrongPreset(String),
    #[error("operation needs d = 2, instance has d = {0}")]
    DimensionUnsupported(usize),
    #[error("point {0} is not covered by any admissible column")]
    UncoveredPoint(usize),
    #[error("master problem has not been solved to optimality")]
    NotSolved,
    #[error("solution is integral, nothing to branch on")]
    NoFractionality,
    #[error("contradictory branching constraints: {0}")]
    InfeasibleConstraints(String),
    #[error("instance too large for brute force: {0}")]
    SizeLimit(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },
    #[error("row {row} has {got} columns, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, got: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
