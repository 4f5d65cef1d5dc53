use nalgebra::{DMatrix, DVector};

const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Feasible(DVector<f64>),
    /// Phase-one optimum stayed positive.
    Infeasible {
        infeasibility: f64,
    },
}

/// Finds `x >= 0` with `a x = b` by a phase-one simplex on the artificial
/// variables, using Bland's rule against cycling.
pub fn feasible_point(a: &DMatrix<f64>, b: &DVector<f64>) -> LpOutcome {
    let (m, n) = a.shape();
    assert_eq!(b.len(), m, "row count must match right-hand side");
    if m == 0 {
        return LpOutcome::Feasible(DVector::zeros(n));
    }

    // columns: n structural, m artificial, then rhs
    let width = n + m + 1;
    let mut tab = DMatrix::zeros(m + 1, width);
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            tab[(i, j)] = sign * a[(i, j)];
        }
        tab[(i, n + i)] = 1.0;
        tab[(i, width - 1)] = sign * b[i];
    }
    // objective row holds reduced costs of min sum(artificials)
    for j in 0..width {
        if j >= n && j < n + m {
            continue;
        }
        let s: f64 = (0..m).map(|i| tab[(i, j)]).sum();
        tab[(m, j)] = -s;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let scale = 1.0 + b.amax();
    let max_pivots = 50 * (n + m) + 100;
    for _ in 0..max_pivots {
        let Some(enter) = (0..n + m).find(|&j| tab[(m, j)] < -PIVOT_EPS * scale) else { break };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let coef = tab[(i, enter)];
            if coef > PIVOT_EPS {
                let ratio = tab[(i, width - 1)] / coef;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - PIVOT_EPS || ((ratio - lr).abs() <= PIVOT_EPS && basis[i] < basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        // phase one is bounded below by zero, so a pivot row always exists
        let Some((row, _)) = leave else { break };
        pivot(&mut tab, row, enter);
        basis[row] = enter;
    }

    let infeasibility = -tab[(m, width - 1)];
    if infeasibility > 1e-9 * scale {
        return LpOutcome::Infeasible { infeasibility };
    }
    let mut x = DVector::zeros(n);
    for (i, &var) in basis.iter().enumerate() {
        if var < n {
            x[var] = tab[(i, width - 1)].max(0.0);
        }
    }
    LpOutcome::Feasible(x)
}

fn pivot(tab: &mut DMatrix<f64>, row: usize, col: usize) {
    let p = tab[(row, col)];
    let width = tab.ncols();
    for j in 0..width {
        tab[(row, j)] /= p;
    }
    for i in 0..tab.nrows() {
        if i == row {
            continue;
        }
        let factor = tab[(i, col)];
        if factor != 0.0 {
            for j in 0..width {
                let v = tab[(row, j)];
                tab[(i, j)] -= factor * v;
            }
        }
    }
}
