//! Embedded geometry for the Euclidean space and the unit sphere.
//!
//! Points are stored in ambient coordinates. A tangent vector is the ambient
//! velocity of a curve through its base point, so on the sphere it lives in
//! the plane orthogonal to the base. The Riemannian metric is the ambient dot
//! product on both manifolds.

use nalgebra::DVector;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance used to decide that two base points coincide.
pub const BASE_TOL: f64 = 1e-12;
/// Tolerance of the sphere tangency invariant.
pub const TANGENCY_TOL: f64 = 1e-10;
/// Angles below this are treated as coincident points in `log`.
pub const COINCIDENT_ANGLE: f64 = 1e-9;
/// `<p, q> <= -1 + ANTIPODAL_TOL` is rejected by `log`.
pub const ANTIPODAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ManifoldKind {
    Euclidean {
        dim: usize,
    },
    /// Unit sphere in `R^ambient_dim`.
    Sphere {
        ambient_dim: usize,
    },
}

impl ManifoldKind {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidManifold("euclidean dimension must be positive".into()));
        }
        Ok(ManifoldKind::Euclidean { dim })
    }

    pub fn sphere(ambient_dim: usize) -> Result<Self> {
        if ambient_dim < 2 {
            return Err(Error::InvalidManifold(format!(
                "sphere ambient dimension must be at least 2, got {ambient_dim}"
            )));
        }
        Ok(ManifoldKind::Sphere { ambient_dim })
    }

    pub fn ambient_dim(&self) -> usize {
        match *self {
            ManifoldKind::Euclidean { dim } => dim,
            ManifoldKind::Sphere { ambient_dim } => ambient_dim,
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match *self {
            ManifoldKind::Euclidean { dim } => dim,
            ManifoldKind::Sphere { ambient_dim } => ambient_dim - 1,
        }
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self, ManifoldKind::Sphere { .. })
    }

    /// Injectivity radius of the exponential map.
    pub fn injectivity_radius(&self) -> f64 {
        match self {
            ManifoldKind::Euclidean { .. } => f64::INFINITY,
            ManifoldKind::Sphere { .. } => std::f64::consts::PI,
        }
    }
}

/// A point on a manifold in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    manifold: ManifoldKind,
    coords: DVector<f64>,
}

impl Point {
    /// Builds a point; sphere coordinates are renormalized.
    pub fn new(manifold: ManifoldKind, coords: DVector<f64>) -> Result<Self> {
        let n = manifold.ambient_dim();
        if coords.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: coords.len() });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint("non-finite coordinate".into()));
        }
        match manifold {
            ManifoldKind::Euclidean { .. } => Ok(Point { manifold, coords }),
            ManifoldKind::Sphere { .. } => {
                let norm = coords.norm();
                if norm < 1e-300 {
                    return Err(Error::InvalidPoint("zero vector cannot be normalized".into()));
                }
                // leave unit vectors bit-exact so written points read back unchanged
                if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
                    Ok(Point { manifold, coords })
                } else {
                    Ok(Point { manifold, coords: coords / norm })
                }
            }
        }
    }

    pub fn from_slice(manifold: ManifoldKind, coords: &[f64]) -> Result<Self> {
        Point::new(manifold, DVector::from_column_slice(coords))
    }

    pub fn manifold(&self) -> ManifoldKind {
        self.manifold
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.coords.iter().copied().collect()
    }

    /// Same manifold and coordinates within [`BASE_TOL`].
    pub fn approx_eq(&self, other: &Point) -> bool {
        self.manifold == other.manifold
            && self.coords.iter().zip(other.coords.iter()).all(|(a, b)| (a - b).abs() <= BASE_TOL)
    }

    /// The antipodal point of a sphere point; `None` in Euclidean space.
    pub fn antipode(&self) -> Option<Point> {
        self.manifold.is_sphere().then(|| Point { manifold: self.manifold, coords: -&self.coords })
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.coords.iter())
    }
}

/// An ambient vector tagged with the point whose tangent space it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: Point,
    vec: DVector<f64>,
}

impl TangentVector {
    /// Checks dimension and (on the sphere) tangency.
    pub fn new(base: Point, vec: DVector<f64>) -> Result<Self> {
        let n = base.manifold.ambient_dim();
        if vec.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: vec.len() });
        }
        if base.manifold.is_sphere() {
            let normal = vec.dot(&base.coords);
            if normal.abs() > TANGENCY_TOL * vec.norm().max(1.0) {
                return Err(Error::NotTangent(normal));
            }
        }
        Ok(TangentVector { base, vec })
    }

    pub fn zero(base: &Point) -> Self {
        TangentVector { base: base.clone(), vec: DVector::zeros(base.coords.len()) }
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn vec(&self) -> &DVector<f64> {
        &self.vec
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.vec.iter().copied().collect()
    }

    pub fn norm(&self) -> f64 {
        self.vec.norm()
    }

    pub fn norm_squared(&self) -> f64 {
        self.vec.norm_squared()
    }

    pub fn scale(&self, alpha: f64) -> Self {
        TangentVector { base: self.base.clone(), vec: &self.vec * alpha }
    }

    pub fn add(&self, other: &TangentVector) -> Result<Self> {
        self.check_base(other)?;
        Ok(TangentVector { base: self.base.clone(), vec: &self.vec + &other.vec })
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: f64, other: &TangentVector) -> Result<Self> {
        self.check_base(other)?;
        Ok(TangentVector { base: self.base.clone(), vec: &self.vec + &other.vec * alpha })
    }

    fn check_base(&self, other: &TangentVector) -> Result<()> {
        if self.base.approx_eq(&other.base) {
            Ok(())
        } else {
            Err(Error::IncompatibleTangentSpaces)
        }
    }
}

impl Serialize for TangentVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.vec.iter())
    }
}

/// Riemannian metric: the ambient dot product.
pub fn inner(u: &TangentVector, v: &TangentVector) -> Result<f64> {
    u.check_base(v)?;
    Ok(u.vec.dot(&v.vec))
}

pub fn exp(p: &Point, v: &TangentVector) -> Result<Point> {
    if !p.approx_eq(&v.base) {
        return Err(Error::IncompatibleTangentSpaces);
    }
    Ok(exp_unchecked(p, &v.vec))
}

pub(crate) fn exp_unchecked(p: &Point, v: &DVector<f64>) -> Point {
    match p.manifold {
        ManifoldKind::Euclidean { .. } => Point { manifold: p.manifold, coords: &p.coords + v },
        ManifoldKind::Sphere { .. } => {
            let t = v.norm();
            if t == 0.0 {
                return p.clone();
            }
            let coords = &p.coords * t.cos() + v * (t.sin() / t);
            let norm = coords.norm();
            Point { manifold: p.manifold, coords: coords / norm }
        }
    }
}

pub fn log(p: &Point, q: &Point) -> Result<TangentVector> {
    if p.manifold != q.manifold {
        return Err(Error::ManifoldMismatch);
    }
    match p.manifold {
        ManifoldKind::Euclidean { .. } => Ok(TangentVector { base: p.clone(), vec: &q.coords - &p.coords }),
        ManifoldKind::Sphere { .. } => {
            let cos = p.coords.dot(&q.coords);
            if cos <= -1.0 + ANTIPODAL_TOL {
                return Err(Error::Antipodal);
            }
            let theta = sphere_angle(&p.coords, &q.coords);
            if theta < COINCIDENT_ANGLE {
                return Ok(tangent_project_vec(p, &q.coords - &p.coords));
            }
            let dir = &q.coords - &p.coords * cos;
            let dir_norm = dir.norm();
            let vec = dir * (theta / dir_norm);
            Ok(tangent_project_vec(p, vec))
        }
    }
}

pub fn dist(p: &Point, q: &Point) -> Result<f64> {
    if p.manifold != q.manifold {
        return Err(Error::ManifoldMismatch);
    }
    Ok(match p.manifold {
        ManifoldKind::Euclidean { .. } => (&q.coords - &p.coords).norm(),
        ManifoldKind::Sphere { .. } => sphere_angle(&p.coords, &q.coords),
    })
}

/// Great-circle angle between unit vectors, `2 atan2(|p - q|, |p + q|)`.
fn sphere_angle(p: &DVector<f64>, q: &DVector<f64>) -> f64 {
    let diff = (p - q).norm();
    let sum = (p + q).norm();
    2.0 * diff.atan2(sum)
}

/// Orthogonal projection of an ambient vector onto `T_p M`.
pub fn tangent_project(p: &Point, w: &[f64]) -> Result<TangentVector> {
    if w.len() != p.coords.len() {
        return Err(Error::DimensionMismatch { expected: p.coords.len(), found: w.len() });
    }
    Ok(tangent_project_vec(p, DVector::from_column_slice(w)))
}

pub(crate) fn tangent_project_vec(p: &Point, w: DVector<f64>) -> TangentVector {
    let vec = match p.manifold {
        ManifoldKind::Euclidean { .. } => w,
        ManifoldKind::Sphere { .. } => {
            let c = w.dot(&p.coords);
            let mut v = w - &p.coords * c;
            // second pass removes the residual normal component left by rounding
            let c2 = v.dot(&p.coords);
            v -= &p.coords * c2;
            v
        }
    };
    TangentVector { base: p.clone(), vec }
}

/// A deterministic orthonormal basis of `T_p M`.
pub fn tangent_basis(p: &Point) -> Vec<TangentVector> {
    let n = p.coords.len();
    match p.manifold {
        ManifoldKind::Euclidean { .. } => (0..n)
            .map(|i| TangentVector { base: p.clone(), vec: DVector::from_fn(n, |j, _| f64::from(j == i)) })
            .collect(),
        ManifoldKind::Sphere { .. } => {
            // Gram-Schmidt against p, trying the most orthogonal axes first.
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| p.coords[a].abs().total_cmp(&p.coords[b].abs()).then(a.cmp(&b)));
            let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n - 1);
            for &axis in &order {
                if basis.len() == n - 1 {
                    break;
                }
                let mut v = DVector::from_fn(n, |j, _| f64::from(j == axis));
                for _ in 0..2 {
                    let c = v.dot(&p.coords);
                    v -= &p.coords * c;
                    for b in &basis {
                        let c = v.dot(b);
                        v -= b * c;
                    }
                }
                let norm = v.norm();
                if norm > 1e-6 {
                    basis.push(v / norm);
                }
            }
            basis.into_iter().map(|vec| TangentVector { base: p.clone(), vec }).collect()
        }
    }
}

/// Differential of `exp_p` at `v` applied to `w` (both tangent at `p`).
pub fn exp_differential(p: &Point, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    match p.manifold {
        ManifoldKind::Euclidean { .. } => w.clone(),
        ManifoldKind::Sphere { .. } => {
            let t = v.norm();
            if t == 0.0 {
                return w.clone();
            }
            let u = v / t;
            let along = w.dot(&u);
            let across = w - &u * along;
            &p.coords * (-t.sin() * along) + &u * (t.cos() * along) + across * (t.sin() / t)
        }
    }
}
