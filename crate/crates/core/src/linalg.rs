//! Small dense least-squares helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

/// Relative size of an R diagonal entry below which a QR factorization is
/// treated as rank deficient.
const RANK_TOL: f64 = 1e-12;

/// Minimizes `||a z - y||` by Householder QR, with one step of iterative
/// refinement. Falls back to a truncated SVD when `a` is numerically rank
/// deficient, returning the minimum-norm solution.
pub fn least_squares(a: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let k = a.ncols();
    if k == 0 {
        return DVector::zeros(0);
    }
    if a.nrows() >= k {
        if let Some(z) = qr_solve(a, y) {
            let r = y - a * &z;
            if let Some(dz) = qr_solve(a, &r) {
                return z + dz;
            }
            return z;
        }
    }
    svd_solve(a, y)
}

fn qr_solve(a: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let qr = a.clone().qr();
    let r = qr.r();
    let max_diag = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_diag == 0.0 || r.diagonal().iter().any(|v| v.abs() <= RANK_TOL * max_diag) {
        return None;
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty)
}

fn svd_solve(a: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, v| m.max(*v));
    let eps = (RANK_TOL * smax).max(f64::MIN_POSITIVE);
    svd.solve(y, eps)
        .unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Euclidean norm of the component of `v` orthogonal to the column span of `a`.
pub fn orthogonal_residual_norm(a: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    if a.ncols() == 0 {
        return v.norm();
    }
    let z = least_squares(a, v);
    (v - a * z).norm()
}

/// Copies the listed columns of `m`, in order.
pub fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}
