//! Dense symmetric-matrix helpers shared across assembly and verification.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// Relative tolerance used when declaring a shape matrix positive definite:
/// the smallest eigenvalue must be at least `PD_REL_TOL * ||M||_2`.
pub const PD_REL_TOL: f64 = 1e-9;

/// Eigenvalue floor applied when factorizing or inverting shape matrices.
pub const EIG_FLOOR: f64 = 1e-12;

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Smallest eigenvalue of a symmetric matrix. Returns 0 for 0×0 input.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let sym = symmetrize(m);
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Largest absolute eigenvalue of a symmetric matrix (its spectral norm).
pub fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let sym = symmetrize(m);
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
}

/// (M + Mᵀ)/2, shielding the eigensolver from asymmetric rounding noise.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Check that `m` is positive definite relative to its spectral norm.
pub fn check_positive_definite(m: &DMatrix<f64>, context: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            context: context.to_string(),
            expected: "square matrix".to_string(),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    if m.nrows() == 0 {
        return Ok(());
    }
    let min_eig = min_eigenvalue(m);
    let scale = spectral_norm_sym(m);
    if min_eig < PD_REL_TOL * scale || scale == 0.0 {
        return Err(Error::NotPositiveDefinite {
            context: context.to_string(),
            min_eig,
        });
    }
    Ok(())
}

/// Symmetric square root via eigendecomposition, with eigenvalues floored
/// at `floor` before taking the root.
pub fn symmetric_sqrt(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return m.clone();
    }
    if let Some(d) = as_diagonal(m) {
        return DMatrix::from_diagonal(&d.map(|v| v.max(floor).sqrt()));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(floor).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose()
}

/// Inverse of a symmetric PD matrix via eigendecomposition, eigenvalues
/// floored at `floor`.
pub fn symmetric_inverse(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return m.clone();
    }
    if let Some(d) = as_diagonal(m) {
        return DMatrix::from_diagonal(&d.map(|v| 1.0 / v.max(floor)));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let inv_vals = eig.eigenvalues.map(|v| 1.0 / v.max(floor));
    &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose()
}

/// Returns the diagonal when every off-diagonal entry is exactly zero.
/// Diagonal inputs are common (box constraints, Kronecker-diagonal costs)
/// and the exact path keeps their factors free of eigensolver noise.
fn as_diagonal(m: &DMatrix<f64>) -> Option<nalgebra::DVector<f64>> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j && m[(i, j)] != 0.0 {
                return None;
            }
        }
    }
    Some(m.diagonal())
}
