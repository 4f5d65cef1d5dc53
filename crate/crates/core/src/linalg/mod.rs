//! Small dense solvers shared by the KKT and CQ modules.

mod nnls;
mod simplex;

pub use nnls::{sign_constrained_lsq, LsqSolution};
pub use simplex::{feasible_point, LpOutcome};

use nalgebra::{DMatrix, DVector};

/// Singular values in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Rank threshold: relative to the largest singular value when it exceeds
/// one, absolute otherwise.
pub fn rank_threshold(sigma_max: f64, rank_tol: f64) -> f64 {
    if sigma_max > 1.0 {
        rank_tol * sigma_max
    } else {
        rank_tol
    }
}

/// Result of a column-rank test on a coordinate matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnRank {
    pub full: bool,
    /// `ncols`-th singular value (zero when `ncols` exceeds `nrows`); `None`
    /// for an empty column set.
    pub sigma_min: Option<f64>,
}

pub fn column_rank(a: &DMatrix<f64>, rank_tol: f64) -> ColumnRank {
    let k = a.ncols();
    if k == 0 {
        return ColumnRank { full: true, sigma_min: None };
    }
    let s = singular_values(a);
    let sigma_max = s.first().copied().unwrap_or(0.0);
    let sigma_min = if k > a.nrows() { 0.0 } else { s[k - 1] };
    ColumnRank { full: sigma_min > rank_threshold(sigma_max, rank_tol), sigma_min: Some(sigma_min) }
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = (smax * 1e-13).max(1e-300);
    svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_duplicate_columns() {
        let a = DMatrix::from_column_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]);
        let r = column_rank(&a, 1e-8);
        assert!(!r.full);
        assert!(r.sigma_min.unwrap() < 1e-12);
    }

    #[test]
    fn too_many_columns_is_deficient() {
        let a = DMatrix::from_column_slice(1, 2, &[1.0, 3.0]);
        assert_eq!(column_rank(&a, 1e-8), ColumnRank { full: false, sigma_min: Some(0.0) });
    }

    #[test]
    fn empty_set_is_independent() {
        let a = DMatrix::<f64>::zeros(3, 0);
        assert_eq!(column_rank(&a, 1e-8), ColumnRank { full: true, sigma_min: None });
    }

    #[test]
    fn relative_threshold_for_large_matrices() {
        let a = DMatrix::from_column_slice(2, 2, &[1e9, 0.0, 0.0, 1.0]);
        assert!(!column_rank(&a, 1e-8).full);
        let b = DMatrix::from_column_slice(2, 2, &[0.5, 0.0, 0.0, 1e-7]);
        assert!(column_rank(&b, 1e-8).full);
    }
}
