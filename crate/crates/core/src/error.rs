use std::io;

use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum SscError {
    #[error("entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("known-entry mask of point {point} is empty")]
    EmptyMask { point: usize },
    #[error("self-expression needs at least 2 points, got {points}")]
    TooFewPoints { points: usize },
    #[error("column {col} has zero norm")]
    ZeroColumn { col: usize },
    #[error("degenerate data scale: {which} is zero")]
    DegenerateScale { which: &'static str },
    #[error("ADMM did not converge after {iterations} iterations (max residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("similarity graph has no edges")]
    EmptyGraph,
    #[error("requested {requested} clusters for {points} points")]
    TooManyClusters { requested: usize, points: usize },
    #[error("basis is not orthonormal (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },
    #[error("points of subspace {subspace} have rank {rank}, expected {expected}")]
    RankDeficient { subspace: usize, rank: usize, expected: usize },
    #[error("target not representable in the restricted dictionary (residual {residual:e})")]
    RestrictedInfeasible { residual: f64 },
    #[error("ambient dimension {ambient} is smaller than required {required}")]
    DimensionTooSmall { ambient: usize, required: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no row is known for every point")]
    EmptyCommonSupport,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = SscError> = std::result::Result<T, E>;
