//! Normal-coordinate charts: `x_i = <log_base(p), e_i>` for an orthonormal
//! frame `e` at the base point.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::manifold::{self, inner, Point, TangentVector};

const FRAME_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Chart {
    base: Point,
    frame: Vec<TangentVector>,
    radius: f64,
}

impl Chart {
    /// Normal chart with the default frame from [`manifold::tangent_basis`].
    pub fn normal(base: Point, radius: f64) -> Result<Self> {
        let frame = manifold::tangent_basis(&base);
        Chart::with_frame(base, frame, radius)
    }

    /// The largest admissible normal chart at `base`.
    pub fn normal_max(base: Point) -> Result<Self> {
        let radius = match base.manifold().injectivity_radius() {
            r if r.is_finite() => r - 1e-6,
            r => r,
        };
        Chart::normal(base, radius)
    }

    pub fn with_frame(base: Point, frame: Vec<TangentVector>, radius: f64) -> Result<Self> {
        let dim = base.manifold().intrinsic_dim();
        if frame.len() != dim {
            return Err(Error::InvalidChart(format!("frame has {} vectors, need {dim}", frame.len())));
        }
        let injectivity = base.manifold().injectivity_radius();
        if radius.is_nan() || radius <= 0.0 || (injectivity.is_finite() && radius >= injectivity) {
            return Err(Error::InvalidChart(format!("radius {radius} outside (0, injectivity radius)")));
        }
        for (i, a) in frame.iter().enumerate() {
            if !a.base().approx_eq(&base) {
                return Err(Error::IncompatibleTangentSpaces);
            }
            for (j, b) in frame.iter().enumerate().skip(i) {
                let expected = if i == j { 1.0 } else { 0.0 };
                if (inner(a, b)? - expected).abs() > FRAME_TOL {
                    return Err(Error::InvalidChart("frame is not orthonormal".into()));
                }
            }
        }
        Ok(Chart { base, frame, radius })
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn frame(&self) -> &[TangentVector] {
        &self.frame
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.frame.len()
    }

    pub fn forward(&self, p: &Point) -> Result<DVector<f64>> {
        let d = manifold::dist(&self.base, p)?;
        if d >= self.radius {
            return Err(Error::ChartDomain { value: d, radius: self.radius });
        }
        let v = manifold::log(&self.base, p)?;
        Ok(DVector::from_iterator(self.dim(), self.frame.iter().map(|e| e.vec().dot(v.vec()))))
    }

    pub fn backward(&self, x: &DVector<f64>) -> Result<Point> {
        let v = self.tangent_from_coords(x)?;
        let norm = x.norm();
        if norm >= self.radius {
            return Err(Error::ChartDomain { value: norm, radius: self.radius });
        }
        Ok(manifold::exp_unchecked(&self.base, v.vec()))
    }

    /// `sum_i x_i e_i` at the base point.
    pub fn tangent_from_coords(&self, x: &DVector<f64>) -> Result<TangentVector> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        let n = self.base.manifold().ambient_dim();
        let mut v = DVector::zeros(n);
        for (e, xi) in self.frame.iter().zip(x.iter()) {
            v += e.vec() * *xi;
        }
        TangentVector::new(self.base.clone(), v)
    }

    /// Ambient Jacobian of the inverse chart at `x` (columns are the images
    /// of the coordinate directions).
    pub fn inverse_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let v = self.tangent_from_coords(x)?;
        let n = self.base.manifold().ambient_dim();
        let mut jac = DMatrix::zeros(n, self.dim());
        for (i, e) in self.frame.iter().enumerate() {
            jac.set_column(i, &manifold::exp_differential(&self.base, v.vec(), e.vec()));
        }
        Ok(jac)
    }
}
