use nalgebra::{DMatrix, DVector};

use super::lstsq;

#[derive(Debug, Clone, PartialEq)]
pub struct LsqSolution {
    pub x: DVector<f64>,
    /// `a x - b`
    pub residual: DVector<f64>,
}

/// Minimizes `|a x - b|` subject to `x_i >= 0` wherever `nonneg[i]`; the
/// remaining variables are free.
///
/// Lawson-Hanson active-set iteration where free variables never leave the
/// passive set. Sub-problems are solved in the minimum-norm sense, so
/// dependent columns are tolerated.
pub fn sign_constrained_lsq(a: &DMatrix<f64>, b: &DVector<f64>, nonneg: &[bool]) -> LsqSolution {
    let n = a.ncols();
    assert_eq!(nonneg.len(), n, "sign pattern length must match column count");
    assert_eq!(a.nrows(), b.len(), "row count must match right-hand side");

    let mut passive: Vec<bool> = nonneg.iter().map(|&nn| !nn).collect();
    let mut x = solve_passive(a, b, &passive);
    let scale = a.norm() * b.norm().max(1e-300);
    let tol = 1e-13 * scale.max(1e-300);
    let max_outer = 10 * n + 50;

    // columns whose insertion failed at the current x; cleared when x moves
    let mut blocked = vec![false; n];
    for _ in 0..max_outer {
        let r = b - a * &x;
        let w = a.transpose() * &r;
        let candidate = (0..n)
            .filter(|&j| nonneg[j] && !passive[j] && !blocked[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]).then(j.cmp(&i)));
        let Some(j) = candidate else { break };
        passive[j] = true;

        let mut moved = false;
        for _ in 0..(3 * n + 3) {
            let z = solve_passive(a, b, &passive);
            let infeasible: Vec<usize> = (0..n).filter(|&i| nonneg[i] && passive[i] && z[i] <= 0.0).collect();
            if infeasible.is_empty() {
                x = z;
                moved = true;
                break;
            }
            let alpha = infeasible
                .iter()
                .map(|&i| {
                    let denom = x[i] - z[i];
                    if denom > 0.0 {
                        x[i] / denom
                    } else {
                        0.0
                    }
                })
                .fold(f64::INFINITY, f64::min)
                .clamp(0.0, 1.0);
            x += (&z - &x) * alpha;
            for i in 0..n {
                if nonneg[i] && passive[i] && x[i] <= 1e-15 * x.amax().max(1.0) {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            if alpha > 0.0 {
                moved = true;
            }
        }
        if moved {
            blocked.iter_mut().for_each(|b| *b = false);
        } else {
            blocked[j] = true;
            passive[j] = false;
            x[j] = 0.0;
        }
    }

    let residual = a * &x - b;
    LsqSolution { x, residual }
}

fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let idx: Vec<usize> = (0..a.ncols()).filter(|&j| passive[j]).collect();
    let mut x = DVector::zeros(a.ncols());
    if idx.is_empty() {
        return x;
    }
    let sub = a.select_columns(idx.iter());
    let z = lstsq(&sub, b);
    for (k, &j) in idx.iter().enumerate() {
        x[j] = z[k];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(a: &DMatrix<f64>, b: &DVector<f64>, nonneg: &[bool]) -> f64 {
        // enumerate supports: optimum lies on some face with free LS solution
        let n = a.ncols();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            let cols: Vec<usize> = (0..n).filter(|&j| !nonneg[j] || mask & (1 << j) != 0).collect();
            let mut x = DVector::zeros(n);
            if !cols.is_empty() {
                let z = lstsq(&a.select_columns(cols.iter()), b);
                for (k, &j) in cols.iter().enumerate() {
                    x[j] = z[k];
                }
            }
            if (0..n).all(|j| !nonneg[j] || x[j] >= -1e-12) {
                best = best.min((a * &x - b).norm());
            }
        }
        best
    }

    #[test]
    fn simple_clipping() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let b = DVector::from_column_slice(&[-1.0, 0.0]);
        let sol = sign_constrained_lsq(&a, &b, &[true]);
        assert_eq!(sol.x[0], 0.0);
        let sol = sign_constrained_lsq(&a, &b, &[false]);
        assert!((sol.x[0] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn duplicate_columns() {
        let a = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let b = DVector::from_column_slice(&[2.0, 0.0]);
        let sol = sign_constrained_lsq(&a, &b, &[true, true]);
        assert!(sol.residual.norm() < 1e-12);
        assert!(sol.x.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn empty_problem() {
        let a = DMatrix::<f64>::zeros(3, 0);
        let b = DVector::from_column_slice(&[1.0, 2.0, 2.0]);
        let sol = sign_constrained_lsq(&a, &b, &[]);
        assert_eq!(sol.residual.norm(), 3.0);
    }

    proptest! {
        #[test]
        fn matches_support_enumeration(
            entries in proptest::collection::vec(-2.0f64..2.0, 12),
            rhs in proptest::collection::vec(-2.0f64..2.0, 3),
            signs in proptest::collection::vec(any::<bool>(), 4),
        ) {
            let a = DMatrix::from_column_slice(3, 4, &entries);
            let b = DVector::from_column_slice(&rhs);
            let sol = sign_constrained_lsq(&a, &b, &signs);
            for (x, constrained) in sol.x.iter().zip(&signs) {
                if *constrained {
                    prop_assert!(*x >= 0.0);
                }
            }
            let best = brute_force(&a, &b, &signs);
            prop_assert!(sol.residual.norm() <= best + 1e-9);
        }
    }
}
