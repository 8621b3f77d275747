//! High-order convex optimization toolkit: basic and accelerated
//! second/third-order methods, their subproblem solvers, and diagnostics
//! that verify superlinear-convergence guarantees on live runs.

pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod methods;
pub mod problems;
pub mod subsolvers;

pub use error::{Error, Result};
pub use linalg::{euclidean_norm, evd_symmetric, EigenDecomposition, Matrix, Vector};
