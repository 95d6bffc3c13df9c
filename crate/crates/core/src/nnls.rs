//! Active-set nonnegative least squares (Lawson–Hanson).
//!
//! Solves `minimize ||y - X b||^2 subject to b >= 0`. This is the refit
//! engine behind every fitter in the crate: grid NNLS, FOCBP and the
//! weight refit inside elastic basis pursuit.
//!
//! The dual test is normalized by column norms: index `j` may enter the
//! passive set only if `<r, X_j> / ||X_j|| > tol * max(1, ||r||)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, orthogonal_residual_norm, select_columns};

/// A column is rejected as numerically dependent on the passive set when the
/// part of it orthogonal to the passive span is below this fraction of its norm.
const DEPENDENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct NnlsProblem {
    design: DMatrix<f64>,
    target: DVector<f64>,
    tolerance: f64,
    max_outer: usize,
}

impl NnlsProblem {
    /// Builds a problem with the default tolerance
    /// `1e-10 * max_j ||X_j|| * ||y||` and an outer-iteration cap of `10 p`.
    pub fn new(design: DMatrix<f64>, target: DVector<f64>) -> Result<Self> {
        let (n, p) = design.shape();
        if n == 0 || p == 0 {
            return Err(Error::Dimension(format!("design is {n}x{p}")));
        }
        if target.len() != n {
            return Err(Error::Dimension(format!(
                "design has {n} rows but target has length {}",
                target.len()
            )));
        }
        if design.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design"));
        }
        if target.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("target"));
        }
        let tolerance = default_tolerance(&design, &target);
        Ok(Self {
            design,
            target,
            tolerance,
            max_outer: 10 * p,
        })
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {tolerance}"
            )));
        }
        self.tolerance = tolerance;
        Ok(self)
    }

    pub fn with_max_iterations(mut self, max_outer: usize) -> Self {
        self.max_outer = max_outer.max(1);
        self
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.target
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }
}

/// `1e-10 * (max column norm) * ||y||`, or `1e-10` when that product vanishes.
pub fn default_tolerance(design: &DMatrix<f64>, target: &DVector<f64>) -> f64 {
    let max_col = design
        .column_iter()
        .map(|c| c.norm())
        .fold(0.0f64, f64::max);
    let tol = 1e-10 * max_col * target.norm();
    if tol > 0.0 && tol.is_finite() {
        tol
    } else {
        1e-10
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub coefficients: DVector<f64>,
    /// Indices with strictly positive coefficients, ascending.
    pub active_set: Vec<usize>,
    pub residual: DVector<f64>,
    /// `||residual||^2`
    pub objective: f64,
    pub outer_iterations: usize,
    /// Number of additions to and removals from the passive set.
    pub active_set_changes: usize,
    /// Dual tolerance the solution was certified against.
    pub tolerance: f64,
}

impl NnlsSolution {
    /// Largest violation of the normalized KKT conditions, as a multiple of
    /// `tolerance * max(1, ||r||)`. Values `<= 1` certify optimality.
    pub fn kkt_ratio(&self, design: &DMatrix<f64>) -> f64 {
        let scale = self.tolerance * self.residual.norm().max(1.0);
        let mut worst = 0.0f64;
        for (j, col) in design.column_iter().enumerate() {
            let norm = col.norm();
            if norm == 0.0 {
                continue;
            }
            let dual = col.dot(&self.residual) / norm;
            let violation = if self.coefficients[j] > 0.0 {
                dual.abs()
            } else {
                dual
            };
            worst = worst.max(violation / scale);
        }
        worst
    }
}

pub fn nnls_solve(problem: &NnlsProblem) -> Result<NnlsSolution> {
    solve(problem, &[])
}

/// Same contract as [`nnls_solve`], started from the least-squares fit on
/// `warm_active` (with infeasible indices dropped until the start is feasible).
pub fn nnls_solve_warm(problem: &NnlsProblem, warm_active: &[usize]) -> Result<NnlsSolution> {
    let p = problem.design.ncols();
    if let Some(&bad) = warm_active.iter().find(|&&j| j >= p) {
        return Err(Error::InvalidArgument(format!(
            "warm start index {bad} out of range for {p} columns"
        )));
    }
    solve(problem, warm_active)
}

fn solve(problem: &NnlsProblem, warm: &[usize]) -> Result<NnlsSolution> {
    let x = &problem.design;
    let y = &problem.target;
    let tol = problem.tolerance;
    let p = x.ncols();
    let col_norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();

    let mut beta = DVector::zeros(p);
    let mut passive = vec![false; p];
    let mut changes = 0usize;

    if !warm.is_empty() {
        let mut set: Vec<usize> = warm.to_vec();
        set.sort_unstable();
        set.dedup();
        set.retain(|&j| col_norms[j] > 0.0);
        while !set.is_empty() {
            let z = least_squares(&select_columns(x, &set), y);
            if z.iter().all(|&v| v > 0.0) {
                for (k, &j) in set.iter().enumerate() {
                    beta[j] = z[k];
                    passive[j] = true;
                }
                break;
            }
            let before = set.len();
            set = set
                .iter()
                .zip(z.iter())
                .filter(|(_, &v)| v > 0.0)
                .map(|(&j, _)| j)
                .collect();
            changes += before - set.len();
        }
    }

    let mut residual = y - x * &beta;
    let mut blocked = vec![false; p];
    let mut outer = 0usize;

    loop {
        let threshold = tol * residual.norm().max(1.0);
        let mut candidate: Option<(usize, f64)> = None;
        for j in 0..p {
            if passive[j] || blocked[j] || col_norms[j] == 0.0 {
                continue;
            }
            let dual = x.column(j).dot(&residual) / col_norms[j];
            // strict comparison keeps the smallest index among ties
            if dual > threshold && candidate.is_none_or(|(_, best)| dual > best) {
                candidate = Some((j, dual));
            }
        }
        let Some((entering, _)) = candidate else {
            break;
        };
        if outer >= problem.max_outer {
            return Err(Error::IterationCap {
                iterations: outer,
                best: Box::new(finish(x, y, beta, outer, changes, tol)),
            });
        }
        outer += 1;

        let current: Vec<usize> = (0..p).filter(|&j| passive[j]).collect();
        let sub = select_columns(x, &current);
        let column = x.column(entering).into_owned();
        if orthogonal_residual_norm(&sub, &column) <= DEPENDENCE_TOL * col_norms[entering] {
            blocked[entering] = true;
            continue;
        }

        passive[entering] = true;
        let mut first = true;
        loop {
            let set: Vec<usize> = (0..p).filter(|&j| passive[j]).collect();
            let z = least_squares(&select_columns(x, &set), y);
            let entering_pos = set.binary_search(&entering).ok();
            if first {
                first = false;
                // a positive dual implies a positive coefficient in exact
                // arithmetic; anything else is roundoff, so reject the column
                if let Some(k) = entering_pos {
                    if z[k] <= 0.0 {
                        passive[entering] = false;
                        blocked[entering] = true;
                        break;
                    }
                }
                changes += 1;
                blocked.iter_mut().for_each(|b| *b = false);
            }
            if z.iter().all(|&v| v > 0.0) {
                for (k, &j) in set.iter().enumerate() {
                    beta[j] = z[k];
                }
                break;
            }
            // step from beta toward z, stopping at the first coefficient to hit zero
            let mut alpha = f64::INFINITY;
            let mut leaving = set[0];
            for (k, &j) in set.iter().enumerate() {
                if z[k] <= 0.0 {
                    let step = beta[j] / (beta[j] - z[k]);
                    if step < alpha {
                        alpha = step;
                        leaving = j;
                    }
                }
            }
            for (k, &j) in set.iter().enumerate() {
                beta[j] += alpha * (z[k] - beta[j]);
            }
            beta[leaving] = 0.0;
            for &j in &set {
                if beta[j] <= 0.0 {
                    beta[j] = 0.0;
                    passive[j] = false;
                    changes += 1;
                }
            }
            if !passive.iter().any(|&b| b) {
                break;
            }
        }
        residual = y - x * &beta;
    }

    Ok(finish(x, y, beta, outer, changes, tol))
}

fn finish(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: DVector<f64>,
    outer: usize,
    changes: usize,
    tol: f64,
) -> NnlsSolution {
    let residual = y - x * &beta;
    let objective = residual.norm_squared();
    let active_set = (0..beta.len()).filter(|&j| beta[j] > 0.0).collect();
    NnlsSolution {
        coefficients: beta,
        active_set,
        residual,
        objective,
        outer_iterations: outer,
        active_set_changes: changes,
        tolerance: tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_design() {
        let prob = NnlsProblem::new(DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 2.0])).unwrap();
        let sol = nnls_solve(&prob).unwrap();
        assert!((sol.coefficients[0] - 1.0).abs() < 1e-14);
        assert!((sol.coefficients[1] - 2.0).abs() < 1e-14);
        assert!(sol.residual.norm() < 1e-14);
        assert_eq!(sol.active_set, vec![0, 1]);
    }

    #[test]
    fn negative_target_clips_to_zero() {
        let prob = NnlsProblem::new(
            DMatrix::from_column_slice(2, 1, &[1.0, 1.0]),
            DVector::from_vec(vec![-1.0, -1.0]),
        )
        .unwrap();
        let sol = nnls_solve(&prob).unwrap();
        assert_eq!(sol.coefficients[0], 0.0);
        assert_eq!(sol.residual, DVector::from_vec(vec![-1.0, -1.0]));
        assert!(sol.active_set.is_empty());
    }

    #[test]
    fn rejects_non_finite_and_bad_shapes() {
        let bad = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(matches!(
            NnlsProblem::new(bad, DVector::from_vec(vec![1.0])),
            Err(Error::NonFinite("design"))
        ));
        assert!(matches!(
            NnlsProblem::new(DMatrix::identity(2, 2), DVector::from_vec(vec![1.0])),
            Err(Error::Dimension(_))
        ));
        let prob = NnlsProblem::new(DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert!(prob.clone().with_tolerance(0.0).is_err());
        assert!(nnls_solve_warm(&prob, &[5]).is_err());
    }

    #[test]
    fn ties_enter_smallest_index_first() {
        // duplicated columns: only the first one may carry weight
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let prob = NnlsProblem::new(x, DVector::from_vec(vec![3.0, 3.0])).unwrap();
        let sol = nnls_solve(&prob).unwrap();
        assert_eq!(sol.active_set, vec![0]);
        assert!((sol.coefficients[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn warm_start_on_true_support_makes_no_changes() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.0, 1.0, 0.3, 0.1, 0.0, 1.0]);
        let y = &x * DVector::from_vec(vec![1.0, 0.0, 2.0]);
        let prob = NnlsProblem::new(x, y).unwrap();
        let cold = nnls_solve(&prob).unwrap();
        let warm = nnls_solve_warm(&prob, &cold.active_set).unwrap();
        assert_eq!(warm.active_set_changes, 0);
        assert_eq!(warm.outer_iterations, 0);
        assert!((warm.objective - cold.objective).abs() < 1e-20);
        let empty = nnls_solve_warm(&prob, &[]).unwrap();
        assert_eq!(empty, cold);
    }

    #[test]
    fn iteration_cap_returns_feasible_iterate() {
        let x = DMatrix::identity(3, 3);
        let prob = NnlsProblem::new(x, DVector::from_vec(vec![1.0, 2.0, 3.0]))
            .unwrap()
            .with_max_iterations(1);
        match nnls_solve(&prob) {
            Err(Error::IterationCap { best, iterations }) => {
                assert_eq!(iterations, 1);
                assert!(best.coefficients.iter().all(|&b| b >= 0.0));
                assert_eq!(best.active_set, vec![2]);
            }
            other => panic!("expected cap, got {other:?}"),
        }
    }

    #[test]
    fn zero_columns_are_ignored() {
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]);
        let prob = NnlsProblem::new(x, DVector::from_vec(vec![1.0, 1.0])).unwrap();
        let sol = nnls_solve(&prob).unwrap();
        assert_eq!(sol.active_set, vec![1]);
    }
}
