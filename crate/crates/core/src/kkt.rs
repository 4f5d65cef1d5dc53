//! Lagrangian residuals, multiplier estimation and multiplier certificates.
//!
//! Differentials are represented by their gradients, so the polar of the
//! linearizing cone at `p` is the cone generated by the active inequality
//! gradients plus the span of the equality gradients. Whether `-grad f(p)`
//! lies in it is decided by a sign-constrained least-squares problem; when
//! it does not, the normalized residual is a Farkas witness.
//!
//! Multipliers existing for one objective says nothing about the Guignard
//! condition itself, which quantifies over all objectives.

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::cq;
use crate::error::{Error, Result};
use crate::linalg::{self, sign_constrained_lsq};
use crate::local::{hstack, LocalSystem};
use crate::manifold::{self, Point, TangentVector};
use crate::problem::{ActiveSet, ConstrainedProblem, ScalarField, DEFAULT_ACT_TOL};

pub const DEFAULT_KKT_TOL: f64 = 1e-9;
/// Largest `m + q` accepted by [`multiplier_set_analysis`].
pub const MAX_ENUMERATED_CONSTRAINTS: usize = 12;
/// Relative tolerance for the witness inequalities on constraint gradients.
pub const WITNESS_LIN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Multipliers {
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl Multipliers {
    pub fn zeros(m: usize, q: usize) -> Self {
        Multipliers { mu: vec![0.0; m], lambda: vec![0.0; q] }
    }

    pub fn new(mu: Vec<f64>, lambda: Vec<f64>) -> Self {
        Multipliers { mu, lambda }
    }

    pub fn norm(&self) -> f64 {
        self.mu.iter().chain(&self.lambda).map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Multipliers {
            mu: self.mu.iter().map(|x| x * alpha).collect(),
            lambda: self.lambda.iter().map(|x| x * alpha).collect(),
        }
    }

    /// `self + t * other`
    pub fn add_scaled(&self, t: f64, other: &Multipliers) -> Self {
        Multipliers {
            mu: self.mu.iter().zip(&other.mu).map(|(a, b)| a + t * b).collect(),
            lambda: self.lambda.iter().zip(&other.lambda).map(|(a, b)| a + t * b).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Multipliers) -> f64 {
        self.mu
            .iter()
            .zip(&other.mu)
            .chain(self.lambda.iter().zip(&other.lambda))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn check_dims(&self, prob: &ConstrainedProblem) -> Result<()> {
        if self.mu.len() != prob.num_inequalities() {
            return Err(Error::DimensionMismatch { expected: prob.num_inequalities(), found: self.mu.len() });
        }
        if self.lambda.len() != prob.num_equalities() {
            return Err(Error::DimensionMismatch { expected: prob.num_equalities(), found: self.lambda.len() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktTolerances {
    pub act_tol: f64,
    /// Threshold on the norm of the Lagrangian gradient.
    pub kkt_tol: f64,
}

impl Default for KktTolerances {
    fn default() -> Self {
        KktTolerances { act_tol: DEFAULT_ACT_TOL, kkt_tol: DEFAULT_KKT_TOL }
    }
}

#[derive(Debug, Clone)]
pub struct KktReport {
    /// Squared metric norm of the Lagrangian gradient.
    pub stationarity_sq: f64,
    pub feas_violation: f64,
    pub compl_violation: f64,
    pub multipliers: Option<Multipliers>,
    /// Unit direction `d` in the linearizing cone with `<grad f, d> < 0`.
    pub farkas_witness: Option<TangentVector>,
    /// `-<grad f(p), d>` for the witness.
    pub witness_margin: Option<f64>,
    pub active_set: ActiveSet,
    pub tolerances: KktTolerances,
}

impl KktReport {
    pub fn is_certified_kkt(&self) -> bool {
        self.multipliers.is_some() && self.farkas_witness.is_none()
    }
}

impl Serialize for KktReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Json<'a> {
            stationarity_sq: f64,
            feas_violation: f64,
            compl_violation: f64,
            mu: Option<&'a [f64]>,
            lambda: Option<&'a [f64]>,
            farkas_witness: Option<&'a TangentVector>,
            active_set: &'a ActiveSet,
            tolerances: &'a KktTolerances,
        }
        Json {
            stationarity_sq: self.stationarity_sq,
            feas_violation: self.feas_violation,
            compl_violation: self.compl_violation,
            mu: self.multipliers.as_ref().map(|m| m.mu.as_slice()),
            lambda: self.multipliers.as_ref().map(|m| m.lambda.as_slice()),
            farkas_witness: self.farkas_witness.as_ref(),
            active_set: &self.active_set,
            tolerances: &self.tolerances,
        }
        .serialize(s)
    }
}

/// `f(p) + sum mu_i g_i(p) + sum lambda_j h_j(p)`
pub fn lagrangian_value(prob: &ConstrainedProblem, p: &Point, mult: &Multipliers) -> Result<f64> {
    mult.check_dims(prob)?;
    let mut value = prob.objective().value(p)?;
    for (g, mu) in prob.inequalities().iter().zip(&mult.mu) {
        if *mu != 0.0 {
            value += mu * g.value(p)?;
        }
    }
    for (h, lambda) in prob.equalities().iter().zip(&mult.lambda) {
        if *lambda != 0.0 {
            value += lambda * h.value(p)?;
        }
    }
    Ok(value)
}

pub fn lagrangian_gradient(prob: &ConstrainedProblem, p: &Point, mult: &Multipliers) -> Result<TangentVector> {
    mult.check_dims(prob)?;
    let mut grad = prob.objective().gradient(p)?;
    for (g, mu) in prob.inequalities().iter().zip(&mult.mu) {
        if *mu != 0.0 {
            grad = grad.axpy(*mu, &g.gradient(p)?)?;
        }
    }
    for (h, lambda) in prob.equalities().iter().zip(&mult.lambda) {
        if *lambda != 0.0 {
            grad = grad.axpy(*lambda, &h.gradient(p)?)?;
        }
    }
    Ok(grad)
}

/// Single-constraint least-squares estimate
/// `-<grad g, grad f> / <grad g, grad g>`, without sign clipping.
pub fn single_constraint_estimate(grad_f: &TangentVector, grad_g: &TangentVector) -> Result<f64> {
    let gg = manifold::inner(grad_g, grad_g)?;
    if gg == 0.0 {
        return Err(Error::DegenerateNormal { index: 0 });
    }
    Ok(-manifold::inner(grad_g, grad_f)? / gg)
}

/// Multipliers minimizing the Lagrangian gradient norm with `mu >= 0` on
/// active inequalities, `mu = 0` on inactive ones and `lambda` free.
pub fn estimate_multipliers(prob: &ConstrainedProblem, p: &Point, act_tol: f64) -> Result<Multipliers> {
    let sys = LocalSystem::build(prob, p, act_tol)?;
    sys.check_nondegenerate()?;
    let sol = best_multipliers(&sys.objective, &sys.active_grads, &sys.eq_grads);
    Ok(expand(prob, &sys.active, &sol.mu_active, sol.lambda))
}

/// The same least-squares fit without the sign constraint on `mu`.
pub fn least_squares_multipliers(prob: &ConstrainedProblem, p: &Point, act_tol: f64) -> Result<Multipliers> {
    let sys = LocalSystem::build(prob, p, act_tol)?;
    sys.check_nondegenerate()?;
    let a = hstack(&sys.active_grads, &sys.eq_grads);
    let x = linalg::lstsq(&a, &(-&sys.objective));
    let na = sys.active.active.len();
    Ok(expand(prob, &sys.active, &x.as_slice()[..na], x.as_slice()[na..].to_vec()))
}

pub fn kkt_residual(prob: &ConstrainedProblem, p: &Point, mult: &Multipliers, act_tol: f64) -> Result<KktReport> {
    let grad = lagrangian_gradient(prob, p, mult)?;
    let g = prob.inequality_values(p)?;
    let h = prob.equality_values(p)?;
    let feas_violation = g.iter().map(|v| v.max(0.0)).chain(h.iter().map(|v| v.abs())).fold(0.0, f64::max);
    let compl_violation = g.iter().zip(&mult.mu).map(|(gi, mu)| (mu * gi).abs().max(-mu)).fold(0.0, f64::max);
    Ok(KktReport {
        stationarity_sq: grad.norm_squared(),
        feas_violation,
        compl_violation,
        multipliers: Some(mult.clone()),
        farkas_witness: None,
        witness_margin: None,
        active_set: ActiveSet::from_values(&g, act_tol),
        tolerances: KktTolerances { act_tol, kkt_tol: DEFAULT_KKT_TOL },
    })
}

/// Decides whether `-grad f(p)` lies in the polar of the linearizing cone.
///
/// Returns a report carrying either certified multipliers (Lagrangian
/// gradient norm at most `kkt_tol`) or a unit Farkas witness.
pub fn find_multipliers(prob: &ConstrainedProblem, p: &Point, tol: KktTolerances) -> Result<KktReport> {
    let feas = prob.feasibility(p, tol.act_tol)?;
    if !feas.feasible {
        return Err(Error::Infeasible { violation: feas.max_violation });
    }
    let sys = LocalSystem::build(prob, p, tol.act_tol)?;
    let sol = best_multipliers(&sys.objective, &sys.active_grads, &sys.eq_grads);
    let res_norm = sol.residual.norm();
    let mult = expand(prob, &sys.active, &sol.mu_active, sol.lambda.clone());

    if res_norm <= tol.kkt_tol {
        let mut report = kkt_residual(prob, p, &mult, tol.act_tol)?;
        report.tolerances = tol;
        return Ok(report);
    }

    let witness = sys.to_tangent(&(-&sol.residual / res_norm));
    let margin = certify_witness(prob, p, &witness, tol.act_tol)?
        .ok_or_else(|| Error::Numerical("extracted Farkas witness failed certification".into()))?;
    Ok(KktReport {
        stationarity_sq: res_norm * res_norm,
        feas_violation: feas.max_violation,
        compl_violation: 0.0,
        multipliers: None,
        farkas_witness: Some(witness),
        witness_margin: Some(margin),
        active_set: sys.active,
        tolerances: tol,
    })
}

/// Checks the Farkas-alternative inequalities for `d`:
/// `<grad g_i, d> <= eps` on active `i`, `|<grad h_j, d>| <= eps` and
/// `<grad f, d> < 0`, with `eps` relative to the gradient norms. Returns
/// the margin `-<grad f, d>` when they hold.
pub fn certify_witness(prob: &ConstrainedProblem, p: &Point, d: &TangentVector, act_tol: f64) -> Result<Option<f64>> {
    let active = prob.active_set(p, act_tol)?;
    let scale = d.norm().max(1.0);
    for &i in &active.active {
        let g = prob.inequalities()[i].gradient(p)?;
        if manifold::inner(&g, d)? > WITNESS_LIN_TOL * scale * g.norm().max(1.0) {
            return Ok(None);
        }
    }
    for h in prob.equalities() {
        let g = h.gradient(p)?;
        if manifold::inner(&g, d)?.abs() > WITNESS_LIN_TOL * scale * g.norm().max(1.0) {
            return Ok(None);
        }
    }
    let margin = -manifold::inner(&prob.objective().gradient(p)?, d)?;
    Ok((margin > 0.0).then_some(margin))
}

/// Structure of the multiplier set for one objective.
#[derive(Debug, Clone, PartialEq)]
pub enum MultiplierSet {
    Empty {
        witness: TangentVector,
    },
    Singleton(Multipliers),
    /// Vertices in lexicographic order. A single vertex is possible when the
    /// gradients are dependent but the objective picks out one point.
    BoundedPolytope(Vec<Multipliers>),
    Unbounded {
        point: Multipliers,
        recession: Multipliers,
    },
}

/// Classifies the multiplier set at a feasible point: empty when no
/// multipliers exist, a singleton under LICQ, unbounded when the positive
/// linear dependence system has a nonzero solution, a polytope otherwise.
pub fn multiplier_set_analysis(
    prob: &ConstrainedProblem,
    p: &Point,
    f_override: Option<&ScalarField>,
    tol: KktTolerances,
    rank_tol: f64,
) -> Result<MultiplierSet> {
    let count = prob.num_inequalities() + prob.num_equalities();
    if count > MAX_ENUMERATED_CONSTRAINTS {
        return Err(Error::TooManyConstraints { count, cap: MAX_ENUMERATED_CONSTRAINTS });
    }
    let owned;
    let prob = match f_override {
        Some(f) => {
            owned = prob.with_objective(f.clone())?;
            &owned
        }
        None => prob,
    };
    let report = find_multipliers(prob, p, tol)?;
    let Some(mult) = report.multipliers else {
        let witness = report.farkas_witness.expect("find_multipliers returns a witness when multipliers are absent");
        return Ok(MultiplierSet::Empty { witness });
    };

    let sys = LocalSystem::build(prob, p, tol.act_tol)?;
    if cq::licq_columns(&sys.active_grads, &sys.eq_grads, rank_tol).full {
        return Ok(MultiplierSet::Singleton(mult));
    }
    if let Some((mu_a, lambda)) = cq::positive_dependence(&sys.active_grads, &sys.eq_grads, rank_tol) {
        let recession = expand(prob, &sys.active, &mu_a, lambda);
        return Ok(MultiplierSet::Unbounded { point: mult, recession });
    }
    let vertices = enumerate_vertices(&sys, rank_tol)
        .into_iter()
        .map(|(mu_a, lambda)| expand(prob, &sys.active, &mu_a, lambda))
        .collect();
    Ok(MultiplierSet::BoundedPolytope(vertices))
}

/// Basic feasible solutions of `G_S mu_S + H lambda = -grad f`, `mu_S >= 0`,
/// over supports `S` of the active set with independent columns.
fn enumerate_vertices(sys: &LocalSystem, rank_tol: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let na = sys.active_grads.ncols();
    let q = sys.eq_grads.ncols();
    let d = sys.objective.len();
    let scale = sys.objective.norm().max(1.0);
    let mut vertices: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for mask in 0u32..(1u32 << na) {
        let support: Vec<usize> = (0..na).filter(|&k| mask & (1 << k) != 0).collect();
        if support.len() + q > d {
            continue;
        }
        let gs = sys.active_grads.select_columns(support.iter());
        let a = hstack(&gs, &sys.eq_grads);
        if !linalg::column_rank(&a, rank_tol).full {
            continue;
        }
        let x = linalg::lstsq(&a, &(-&sys.objective));
        if (&a * &x + &sys.objective).norm() > 1e-9 * scale {
            continue;
        }
        if x.iter().take(support.len()).any(|&v| v < -1e-12 * scale) {
            continue;
        }
        let mut mu = vec![0.0; na];
        for (k, &j) in support.iter().enumerate() {
            mu[j] = x[k].max(0.0);
        }
        let lambda: Vec<f64> = x.iter().skip(support.len()).copied().collect();
        let duplicate = vertices.iter().any(|(m2, l2)| {
            m2.iter().zip(&mu).chain(l2.iter().zip(&lambda)).all(|(a, b)| (a - b).abs() <= 1e-9 * scale)
        });
        if !duplicate {
            vertices.push((mu, lambda));
        }
    }
    vertices.sort_by(|(ma, la), (mb, lb)| {
        ma.iter()
            .chain(la)
            .zip(mb.iter().chain(lb))
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    vertices
}

pub(crate) struct CoordMultipliers {
    pub mu_active: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Lagrangian gradient in the same coordinates.
    pub residual: DVector<f64>,
}

/// Sign-constrained fit of `objective + active mu + eq lambda = 0`.
pub(crate) fn best_multipliers(objective: &DVector<f64>, active: &DMatrix<f64>, eq: &DMatrix<f64>) -> CoordMultipliers {
    let a = hstack(active, eq);
    let nonneg: Vec<bool> = (0..a.ncols()).map(|j| j < active.ncols()).collect();
    let sol = sign_constrained_lsq(&a, &(-objective), &nonneg);
    let na = active.ncols();
    CoordMultipliers {
        mu_active: sol.x.iter().take(na).copied().collect(),
        lambda: sol.x.iter().skip(na).copied().collect(),
        residual: sol.residual,
    }
}

fn expand(prob: &ConstrainedProblem, active: &ActiveSet, mu_active: &[f64], lambda: Vec<f64>) -> Multipliers {
    let mut mu = vec![0.0; prob.num_inequalities()];
    for (&i, &v) in active.active.iter().zip(mu_active) {
        mu[i] = v;
    }
    Multipliers { mu, lambda }
}
