//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {context} at index {index}")]
    NonFinite { context: &'static str, index: usize },

    #[error("matrix is not symmetric: |H[{i},{j}] - H[{j},{i}]| = {delta}")]
    NotSymmetric { i: usize, j: usize, delta: f64 },

    #[error("eigendecomposition did not converge")]
    EigenFailed,

    #[error("hessian indefinite beyond tolerance: lambda_min = {lambda_min}")]
    IndefiniteHessian { lambda_min: f64 },

    #[error("exponent overflow in oracle at sample {index}: |t| = {value}")]
    ExponentOverflow { index: usize, value: f64 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid label at row {row}: {value}")]
    InvalidLabel { row: usize, value: f64 },

    #[error("scalar root search failed to bracket or converge (last residual {residual})")]
    RootSearchFailed { residual: f64 },

    #[error("subsolver certificate not reached in {iters} iterations (best lhs {lhs}, rhs {rhs})")]
    CertificateBudget { iters: usize, lhs: f64, rhs: f64 },

    #[error(
        "acceptance test unsatisfiable at nu_min = {nu_min} (psi(v) = {psi_value} < {threshold})"
    )]
    NataExhausted {
        nu_min: f64,
        psi_value: f64,
        threshold: f64,
    },

    #[error("pair bisection budget exhausted (last bracket theta in [{theta_lo}, {theta_hi}])")]
    PairBisectionBudget { theta_lo: f64, theta_hi: f64 },

    #[error("segment search budget exhausted (last bracket tau in [{tau_lo}, {tau_hi}])")]
    SegmentSearchBudget { tau_lo: f64, tau_hi: f64 },

    #[error("inexact proximal step budget exhausted (lhs {lhs}, rhs {rhs})")]
    ProxBudget { lhs: f64, rhs: f64 },

    #[error("inner extragradient budget exhausted (last residual ratio {ratio})")]
    ExtragradientBudget { ratio: f64 },

    #[error("f* hint {fstar} is above the minimum recorded value {min_f}")]
    BadFstarHint { fstar: f64, min_f: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("at iteration {iter}: {source}")]
    AtIteration {
        iter: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps an error with the outer-iteration index it occurred at.
    pub fn at_iteration(self, iter: usize) -> Self {
        Error::AtIteration {
            iter,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
