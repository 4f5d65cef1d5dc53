//! Problem representation: minimize `f(p)` subject to `g(p) <= 0`, `h(p) = 0`
//! on a manifold, with every function given by its value and Riemannian
//! gradient.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::{self, ManifoldKind, Point, TangentVector};

/// Default tolerance for deciding that an inequality is active.
pub const DEFAULT_ACT_TOL: f64 = 1e-8;

type ValueFn = dyn Fn(&Point) -> Result<f64> + Send + Sync;
type GradientFn = dyn Fn(&Point) -> Result<TangentVector> + Send + Sync;

/// A closed geodesic ball `{q : dist(q, center) <= radius}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicBall {
    pub center: Point,
    pub radius: f64,
}

impl GeodesicBall {
    /// On the sphere the radius must lie in `(0, pi/2)`, where the ball is
    /// geodesically convex.
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        let ok = match center.manifold() {
            ManifoldKind::Euclidean { .. } => radius > 0.0 && radius.is_finite(),
            ManifoldKind::Sphere { .. } => radius > 0.0 && radius < std::f64::consts::FRAC_PI_2,
        };
        if ok {
            Ok(GeodesicBall { center, radius })
        } else {
            Err(Error::InvalidRadius(radius))
        }
    }
}

/// A differentiable function on the manifold.
#[derive(Clone)]
pub struct ScalarField {
    manifold: ManifoldKind,
    value: Arc<ValueFn>,
    gradient: Arc<GradientFn>,
    certified: bool,
    ball: Option<GeodesicBall>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("manifold", &self.manifold)
            .field("certified", &self.certified)
            .field("ball", &self.ball)
            .finish_non_exhaustive()
    }
}

impl ScalarField {
    /// A field with an analytic gradient.
    pub fn new<V, G>(manifold: ManifoldKind, value: V, gradient: G) -> Self
    where
        V: Fn(&Point) -> Result<f64> + Send + Sync + 'static,
        G: Fn(&Point) -> Result<TangentVector> + Send + Sync + 'static,
    {
        ScalarField { manifold, value: Arc::new(value), gradient: Arc::new(gradient), certified: true, ball: None }
    }

    /// A field whose gradient is approximated by central differences along
    /// geodesics in an orthonormal tangent basis. Not certified.
    pub fn with_fd_gradient<V>(manifold: ManifoldKind, value: V, step: f64) -> Self
    where
        V: Fn(&Point) -> Result<f64> + Send + Sync + 'static,
    {
        let value: Arc<ValueFn> = Arc::new(value);
        let inner = Arc::clone(&value);
        let gradient = move |p: &Point| -> Result<TangentVector> {
            let mut g = DVector::zeros(p.coords().len());
            for e in manifold::tangent_basis(p) {
                let plus = inner(&manifold::exp_unchecked(p, &(e.vec() * step)))?;
                let minus = inner(&manifold::exp_unchecked(p, &(e.vec() * -step)))?;
                g += e.vec() * ((plus - minus) / (2.0 * step));
            }
            Ok(manifold::tangent_project_vec(p, g))
        };
        ScalarField { manifold, value, gradient: Arc::new(gradient), certified: false, ball: None }
    }

    pub fn manifold(&self) -> ManifoldKind {
        self.manifold
    }

    pub fn is_certified(&self) -> bool {
        self.certified
    }

    /// The ball described by this field when it was built by
    /// [`ball_constraint`].
    pub fn ball(&self) -> Option<&GeodesicBall> {
        self.ball.as_ref()
    }

    pub fn value(&self, p: &Point) -> Result<f64> {
        self.check_manifold(p)?;
        (self.value)(p)
    }

    pub fn gradient(&self, p: &Point) -> Result<TangentVector> {
        self.check_manifold(p)?;
        let g = (self.gradient)(p)?;
        if !g.base().approx_eq(p) {
            return Err(Error::IncompatibleTangentSpaces);
        }
        Ok(g)
    }

    /// `alpha * self`
    pub fn scaled(&self, alpha: f64) -> ScalarField {
        let value = Arc::clone(&self.value);
        let gradient = Arc::clone(&self.gradient);
        ScalarField {
            manifold: self.manifold,
            value: Arc::new(move |p| Ok(alpha * value(p)?)),
            gradient: Arc::new(move |p| Ok(gradient(p)?.scale(alpha))),
            certified: self.certified,
            ball: None,
        }
    }

    fn check_manifold(&self, p: &Point) -> Result<()> {
        if p.manifold() == self.manifold {
            Ok(())
        } else {
            Err(Error::ManifoldMismatch)
        }
    }
}

/// `f(p) = (1/N) sum_i dist(p, d_i)^2`, the Fréchet (Karcher) objective.
pub fn frechet_objective(data: &[Point]) -> Result<ScalarField> {
    let first = data.first().ok_or_else(|| Error::Data("at least one data point is required".into()))?;
    let manifold = first.manifold();
    if data.iter().any(|d| d.manifold() != manifold) {
        return Err(Error::ManifoldMismatch);
    }
    let data: Arc<[Point]> = data.into();
    let n = data.len() as f64;
    let for_value = Arc::clone(&data);
    let value = move |p: &Point| -> Result<f64> {
        let mut terms = for_value.iter().map(|d| manifold::dist(p, d).map(|t| t * t)).collect::<Result<Vec<f64>>>()?;
        // summing in sorted order makes the value independent of data order
        terms.sort_by(f64::total_cmp);
        Ok(terms.iter().sum::<f64>() / n)
    };
    let gradient = move |p: &Point| -> Result<TangentVector> {
        let mut g = DVector::zeros(p.coords().len());
        for d in data.iter() {
            g += manifold::log(p, d)?.vec();
        }
        Ok(manifold::tangent_project_vec(p, g * (-2.0 / n)))
    };
    Ok(ScalarField::new(manifold, value, gradient))
}

/// `dist(p, c)^2` with gradient `-2 log_p c`.
pub fn squared_distance(center: &Point) -> ScalarField {
    let c = center.clone();
    let c2 = center.clone();
    ScalarField::new(
        center.manifold(),
        move |p| manifold::dist(p, &c).map(|d| d * d),
        move |p| Ok(manifold::log(p, &c2)?.scale(-2.0)),
    )
}

/// The ball constraint `g(p) = dist(p, c)^2 - r^2 <= 0`.
pub fn ball_constraint(center: &Point, radius: f64) -> Result<ScalarField> {
    let ball = GeodesicBall::new(center.clone(), radius)?;
    let sq = squared_distance(center);
    let r2 = radius * radius;
    let value = Arc::clone(&sq.value);
    Ok(ScalarField {
        manifold: center.manifold(),
        value: Arc::new(move |p| Ok(value(p)? - r2)),
        gradient: sq.gradient,
        certified: true,
        ball: Some(ball),
    })
}

/// Restriction of the ambient affine function `<a, x> + b`; its Riemannian
/// gradient is the tangent projection of `a`.
pub fn affine_field(manifold: ManifoldKind, a: &[f64], b: f64) -> Result<ScalarField> {
    if a.len() != manifold.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: manifold.ambient_dim(), found: a.len() });
    }
    let a = DVector::from_column_slice(a);
    let a2 = a.clone();
    Ok(ScalarField::new(
        manifold,
        move |p| Ok(a.dot(p.coords()) + b),
        move |p| Ok(manifold::tangent_project_vec(p, a2.clone())),
    ))
}

#[derive(Debug, Clone)]
pub struct ConstrainedProblem {
    manifold: ManifoldKind,
    objective: ScalarField,
    inequalities: Vec<ScalarField>,
    equalities: Vec<ScalarField>,
}

impl ConstrainedProblem {
    pub fn new(objective: ScalarField, inequalities: Vec<ScalarField>, equalities: Vec<ScalarField>) -> Result<Self> {
        let manifold = objective.manifold();
        if inequalities.iter().chain(&equalities).any(|g| g.manifold() != manifold) {
            return Err(Error::ManifoldMismatch);
        }
        Ok(ConstrainedProblem { manifold, objective, inequalities, equalities })
    }

    /// The center-of-mass problem with one ball constraint.
    pub fn constrained_mean(data: &[Point], ball: &GeodesicBall) -> Result<Self> {
        ConstrainedProblem::new(frechet_objective(data)?, vec![ball_constraint(&ball.center, ball.radius)?], vec![])
    }

    pub fn manifold(&self) -> ManifoldKind {
        self.manifold
    }

    pub fn objective(&self) -> &ScalarField {
        &self.objective
    }

    pub fn inequalities(&self) -> &[ScalarField] {
        &self.inequalities
    }

    pub fn equalities(&self) -> &[ScalarField] {
        &self.equalities
    }

    pub fn num_inequalities(&self) -> usize {
        self.inequalities.len()
    }

    pub fn num_equalities(&self) -> usize {
        self.equalities.len()
    }

    /// Same constraints, different objective.
    pub fn with_objective(&self, objective: ScalarField) -> Result<Self> {
        ConstrainedProblem::new(objective, self.inequalities.clone(), self.equalities.clone())
    }

    pub fn inequality_values(&self, p: &Point) -> Result<Vec<f64>> {
        self.inequalities.iter().map(|g| g.value(p)).collect()
    }

    pub fn equality_values(&self, p: &Point) -> Result<Vec<f64>> {
        self.equalities.iter().map(|h| h.value(p)).collect()
    }

    /// Inequalities with `|g_i(p)| <= tol`. Violated ones (`g_i > tol`) are
    /// reported by [`ConstrainedProblem::feasibility`], not here.
    pub fn active_set(&self, p: &Point, tol: f64) -> Result<ActiveSet> {
        check_tol(tol)?;
        let values = self.inequality_values(p)?;
        Ok(ActiveSet::from_values(&values, tol))
    }

    pub fn feasibility(&self, p: &Point, tol: f64) -> Result<FeasibilityReport> {
        check_tol(tol)?;
        let inequality: Vec<f64> = self.inequality_values(p)?.into_iter().map(|g| g.max(0.0)).collect();
        let equality: Vec<f64> = self.equality_values(p)?.into_iter().map(f64::abs).collect();
        let max_violation = inequality.iter().chain(&equality).copied().fold(0.0, f64::max);
        Ok(FeasibilityReport { feasible: max_violation <= tol, max_violation, inequality, equality, tolerance: tol })
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")))
    }
}

/// Partition of the inequality indices (0-based) into active and inactive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveSet {
    pub active: Vec<usize>,
    pub inactive: Vec<usize>,
    pub tolerance: f64,
}

impl ActiveSet {
    pub fn from_values(values: &[f64], tol: f64) -> Self {
        let (active, inactive) = (0..values.len()).partition(|&i| values[i].abs() <= tol);
        ActiveSet { active, inactive, tolerance: tol }
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active.binary_search(&i).is_ok()
    }

    pub fn len(&self) -> usize {
        self.active.len() + self.inactive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub max_violation: f64,
    /// `max(0, g_i(p))`
    pub inequality: Vec<f64>,
    /// `|h_j(p)|`
    pub equality: Vec<f64>,
    pub tolerance: f64,
}
