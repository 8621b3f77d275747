//! Dense vector/matrix primitives and the symmetric eigendecomposition
//! shared by every subproblem solver.
//!
//! The scaling operator is fixed to the identity, so all norms are the
//! classical 2-norm and all computation is in f64.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Eigendecomposition H = U diag(S) U^T with eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Eigenvalues, ascending.
    pub values: Vector,
    /// Orthogonal matrix of eigenvectors (columns), matching `values`.
    pub vectors: Matrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Smallest eigenvalue.
    pub fn lambda_min(&self) -> f64 {
        self.values[0]
    }

    /// Largest absolute eigenvalue (spectral norm of H).
    pub fn spectral_norm(&self) -> f64 {
        let d = self.values.len();
        self.values[0].abs().max(self.values[d - 1].abs())
    }

    /// U diag(S) U^T, used by reconstruction checks.
    pub fn reconstruct(&self) -> Matrix {
        let d = self.dim();
        let mut scaled = self.vectors.clone();
        for j in 0..d {
            let s = self.values[j];
            for i in 0..d {
                scaled[(i, j)] *= s;
            }
        }
        &scaled * self.vectors.transpose()
    }
}

/// 2-norm of a vector: <x, x>^{1/2}.
pub fn euclidean_norm(x: &Vector) -> f64 {
    x.norm()
}

/// Returns the flat (row-major) index of the first non-finite entry, if any.
fn first_non_finite(m: &Matrix) -> Option<usize> {
    let d = m.nrows();
    for i in 0..d {
        for j in 0..m.ncols() {
            if !m[(i, j)].is_finite() {
                return Some(i * d + j);
            }
        }
    }
    None
}

/// Checks a vector for non-finite entries, reporting the offending index.
pub fn check_finite_vector(x: &Vector, context: &'static str) -> Result<()> {
    for (index, v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { context, index });
        }
    }
    Ok(())
}

/// Forces exact symmetry: H <- (H + H^T) / 2.
///
/// IEEE addition is commutative, so the result satisfies H[i,j] == H[j,i]
/// bit-for-bit.
pub fn symmetrize(h: &mut Matrix) {
    let d = h.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (h[(i, j)] + h[(j, i)]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
///
/// Input must be finite and stored exactly symmetric.
pub fn evd_symmetric(h: &Matrix) -> Result<EigenDecomposition> {
    let d = h.nrows();
    if d == 0 || h.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d.max(1),
            got: h.ncols(),
        });
    }
    if let Some(index) = first_non_finite(h) {
        return Err(Error::NonFinite {
            context: "evd_symmetric input",
            index,
        });
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let delta = (h[(i, j)] - h[(j, i)]).abs();
            if delta > 0.0 {
                return Err(Error::NotSymmetric { i, j, delta });
            }
        }
    }

    let eig = nalgebra::linalg::SymmetricEigen::try_new(h.clone(), f64::EPSILON, 0)
        .ok_or(Error::EigenFailed)?;

    // Sort ascending, permuting eigenvector columns to match.
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut values = Vector::zeros(d);
    let mut vectors = Matrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }

    Ok(EigenDecomposition { values, vectors })
}
