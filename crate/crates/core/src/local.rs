//! Gradients of a problem at a point, expressed in an orthonormal tangent
//! frame. Because the frame is orthonormal, the metric becomes the Euclidean
//! dot product on these coordinates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::manifold::{self, Point, TangentVector};
use crate::problem::{ActiveSet, ConstrainedProblem};

#[derive(Debug, Clone)]
pub(crate) struct LocalSystem {
    pub point: Point,
    pub basis: Vec<TangentVector>,
    pub objective: DVector<f64>,
    pub active: ActiveSet,
    /// Columns are the gradients of the active inequalities.
    pub active_grads: DMatrix<f64>,
    /// Columns are the gradients of the equalities.
    pub eq_grads: DMatrix<f64>,
}

impl LocalSystem {
    pub fn build(prob: &ConstrainedProblem, p: &Point, act_tol: f64) -> Result<Self> {
        let basis = manifold::tangent_basis(p);
        let active = prob.active_set(p, act_tol)?;
        let objective = to_coords(&basis, &prob.objective().gradient(p)?);
        let active_cols = active
            .active
            .iter()
            .map(|&i| prob.inequalities()[i].gradient(p).map(|g| to_coords(&basis, &g)))
            .collect::<Result<Vec<_>>>()?;
        let eq_cols = prob
            .equalities()
            .iter()
            .map(|h| h.gradient(p).map(|g| to_coords(&basis, &g)))
            .collect::<Result<Vec<_>>>()?;
        let d = basis.len();
        Ok(LocalSystem {
            point: p.clone(),
            basis,
            objective,
            active,
            active_grads: columns(d, &active_cols),
            eq_grads: columns(d, &eq_cols),
        })
    }

    pub fn to_tangent(&self, coords: &DVector<f64>) -> TangentVector {
        let mut v = DVector::zeros(self.point.coords().len());
        for (e, c) in self.basis.iter().zip(coords.iter()) {
            v += e.vec() * *c;
        }
        manifold::tangent_project_vec(&self.point, v)
    }

    /// Errors when an active inequality has a vanishing gradient.
    pub fn check_nondegenerate(&self) -> Result<()> {
        for (k, &i) in self.active.active.iter().enumerate() {
            if self.active_grads.column(k).norm() <= f64::EPSILON {
                return Err(Error::DegenerateNormal { index: i });
            }
        }
        Ok(())
    }
}

pub(crate) fn to_coords(basis: &[TangentVector], v: &TangentVector) -> DVector<f64> {
    DVector::from_iterator(basis.len(), basis.iter().map(|e| e.vec().dot(v.vec())))
}

pub(crate) fn columns(rows: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

/// `[active | eq]`
pub(crate) fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let rows = a.nrows().max(b.nrows());
    let mut m = DMatrix::zeros(rows, a.ncols() + b.ncols());
    if a.ncols() > 0 {
        m.columns_mut(0, a.ncols()).copy_from(a);
    }
    if b.ncols() > 0 {
        m.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    }
    m
}
