use thiserror::Error;

use crate::frame::Manifold;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FueterError {
    #[error("axis index {0} is not in 1..=3")]
    InvalidAxis(usize),

    #[error("point does not lie on {expected:?}")]
    PointMismatch { expected: Manifold },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quadrature of degree {declared} cannot integrate degree {needed} exactly")]
    QuadratureDegree { declared: usize, needed: usize },

    #[error("truncation not certified: neglected blocks bounded below by {bound:.3e}, tolerance {tol:.3e}")]
    UncertifiedTruncation { bound: f64, tol: f64 },

    #[error("kernel tolerance {tol:.3e} is ambiguous: cluster max {cluster_max:.3e}, next eigenvalue {next:.3e}")]
    AmbiguousKernel { tol: f64, cluster_max: f64, next: f64 },

    #[error("truncation overflow: degree {degree} exceeds limit {limit}")]
    TruncationOverflow { degree: usize, limit: usize },

    #[error("degenerate crossing at s = {s:.12}: smallest |eigenvalue| of the crossing form is {min_abs:.3e}")]
    DegenerateCrossing { s: f64, min_abs: f64 },

    #[error("no kernel at s = {0:.12}")]
    EmptyKernel(f64),

    #[error("eigencurve matching ambiguous between s = {s0} and s = {s1} (overlap {overlap:.3})")]
    MatchingAmbiguity { s0: f64, s1: f64, overlap: f64 },

    #[error("frame is singular; witness kernel vector has norm {witness_norm:.3e}")]
    SingularFrame { witness_norm: f64 },

    #[error("degenerate solution: smallest singular value {sigma_min:.3e} of the linearization")]
    DegenerateSolution { sigma_min: f64 },

    #[error("solver did not converge: best residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("empty intersection: the first bracket column vanishes on the whole affine slice")]
    EmptyIntersection,
}

pub type Result<T> = std::result::Result<T, FueterError>;
