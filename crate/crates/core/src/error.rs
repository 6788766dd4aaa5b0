use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum HeatError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid of {grid} nodes is too coarse for {modes} modes (need at least {required})")]
    GridTooCoarse {
        modes: usize,
        grid: usize,
        required: usize,
    },

    #[error("length mismatch: expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("coefficient a(x) = {value} at node {index} violates uniform ellipticity")]
    NotElliptic { index: usize, value: f64 },

    #[error("tridiagonal eigensolver did not converge for eigenvalue {index} within {iterations} iterations")]
    EigenNoConvergence { index: usize, iterations: usize },

    #[error("subdomain window is empty or lies outside the domain: {0}")]
    EmptyWindow(String),

    #[error(
        "{what} series did not converge within {terms} terms (last relative term {last_ratio:.3e})"
    )]
    SeriesNotConverged {
        what: &'static str,
        terms: usize,
        last_ratio: f64,
    },

    #[error("control window violated: {0}")]
    WindowViolated(String),

    #[error("Cholesky breakdown at pivot {index}: value {pivot:.3e}")]
    CholeskyBreakdown { index: usize, pivot: f64 },

    #[error("routes disagree for {what}: discrepancy {discrepancy:.3e} exceeds {tolerance:.1e}")]
    RouteDisagreement {
        what: &'static str,
        discrepancy: f64,
        tolerance: f64,
    },

    #[error("mode {index} has decay factor {factor} >= 1; the spectral data is corrupt")]
    NonDecayingMode { index: usize, factor: f64 },

    #[error("linear solver breakdown: {0}")]
    SolverBreakdown(String),

    #[error("segmentation infeasible: {0}")]
    SegmentationInfeasible(String),
}

pub type Result<T> = std::result::Result<T, HeatError>;

pub(crate) fn invalid(msg: impl Into<String>) -> HeatError {
    HeatError::InvalidArgument(msg.into())
}
