//! Constraint qualifications at a feasible point.
//!
//! LICQ is a singular-value test on the active gradients. MFCQ is decided
//! twice: as the feasibility LP `<grad g_i, v> <= -1` (active `i`),
//! `<grad h_j, v> = 0`, and through its dual, positive linear independence
//! of the gradients. Both use coordinates in an orthonormal tangent frame.
//!
//! ACQ and GCQ are not decided; [`sample_tangent_cone`] only produces
//! approximate tangent-cone members for containment checks.
//!
//! The LP right-hand side `-1` fixes the strictness margin, so the length of
//! a returned MFCQ vector carries no meaning and it is not normalized.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::kkt::Multipliers;
use crate::linalg::{self, sign_constrained_lsq, ColumnRank, LpOutcome};
use crate::local::{hstack, LocalSystem};
use crate::manifold::{self, Point, TangentVector};
use crate::problem::{ActiveSet, ConstrainedProblem, DEFAULT_ACT_TOL};

pub const DEFAULT_RANK_TOL: f64 = 1e-8;
pub const DEFAULT_LIN_TOL: f64 = 1e-9;
/// Residual bound for a nonzero solution of the positive dependence system.
pub const DUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CqTolerances {
    pub act_tol: f64,
    pub rank_tol: f64,
}

impl Default for CqTolerances {
    fn default() -> Self {
        CqTolerances { act_tol: DEFAULT_ACT_TOL, rank_tol: DEFAULT_RANK_TOL }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LicqResult {
    pub holds: bool,
    /// `None` when no constraint is active and there are no equalities.
    pub sigma_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfcqResult {
    pub holds: bool,
    pub vector: Option<TangentVector>,
    pub equality_rank_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfcqDualResult {
    pub holds: bool,
    pub equality_rank_ok: bool,
    /// Nonzero unit-norm `(mu, lambda)` with `sum mu_i grad g_i + sum
    /// lambda_j grad h_j = 0` and `mu >= 0`, supported on the active set.
    pub violation: Option<Multipliers>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CqReport {
    pub licq: bool,
    pub sigma_min: Option<f64>,
    pub mfcq: bool,
    pub mfcq_vector: Option<TangentVector>,
    pub dual_violation: Option<Multipliers>,
    pub equality_rank_ok: bool,
    pub active_set: ActiveSet,
    pub tolerances: CqTolerances,
    pub seed: Option<u64>,
    /// Whether the primal LP and the dual test reached the same verdict.
    #[serde(skip)]
    pub primal_dual_agree: bool,
}

fn require_feasible(prob: &ConstrainedProblem, p: &Point, act_tol: f64) -> Result<()> {
    let feas = prob.feasibility(p, act_tol)?;
    if feas.feasible {
        Ok(())
    } else {
        Err(Error::Infeasible { violation: feas.max_violation })
    }
}

pub fn check_licq(prob: &ConstrainedProblem, p: &Point, tol: CqTolerances) -> Result<LicqResult> {
    require_feasible(prob, p, tol.act_tol)?;
    let sys = LocalSystem::build(prob, p, tol.act_tol)?;
    let r = licq_columns(&sys.active_grads, &sys.eq_grads, tol.rank_tol);
    Ok(LicqResult { holds: r.full, sigma_min: r.sigma_min })
}

pub fn check_mfcq(prob: &ConstrainedProblem, p: &Point, tol: CqTolerances) -> Result<MfcqResult> {
    require_feasible(prob, p, tol.act_tol)?;
    let sys = LocalSystem::build(prob, p, tol.act_tol)?;
    let (equality_rank_ok, v) = mfcq_vector_coords(&sys.active_grads, &sys.eq_grads, tol.rank_tol);
    let vector = v.map(|c| sys.to_tangent(&c));
    Ok(MfcqResult { holds: vector.is_some(), vector, equality_rank_ok })
}

pub fn mfcq_dual_check(prob: &ConstrainedProblem, p: &Point, tol: CqTolerances) -> Result<MfcqDualResult> {
    require_feasible(prob, p, tol.act_tol)?;
    let sys = LocalSystem::build(prob, p, tol.act_tol)?;
    let equality_rank_ok = linalg::column_rank(&sys.eq_grads, tol.rank_tol).full;
    let violation = positive_dependence(&sys.active_grads, &sys.eq_grads, tol.rank_tol).map(|(mu_a, lambda)| {
        let mut mu = vec![0.0; prob.num_inequalities()];
        for (&i, v) in sys.active.active.iter().zip(mu_a) {
            mu[i] = v;
        }
        Multipliers::new(mu, lambda)
    });
    Ok(MfcqDualResult { holds: equality_rank_ok && violation.is_none(), equality_rank_ok, violation })
}

/// Runs LICQ and both MFCQ tests and checks their mutual consistency.
pub fn cq_report(prob: &ConstrainedProblem, p: &Point, tol: CqTolerances, seed: Option<u64>) -> Result<CqReport> {
    let licq = check_licq(prob, p, tol)?;
    let mfcq = check_mfcq(prob, p, tol)?;
    let dual = mfcq_dual_check(prob, p, tol)?;
    if licq.holds && !mfcq.holds {
        return Err(Error::Numerical("LICQ holds but the MFCQ LP is infeasible".into()));
    }
    if let Some(v) = &mfcq.vector {
        if !is_mfcq_vector(prob, p, v, tol.act_tol)? {
            return Err(Error::Numerical("MFCQ vector violates its defining inequalities".into()));
        }
    }
    Ok(CqReport {
        licq: licq.holds,
        sigma_min: licq.sigma_min,
        mfcq: mfcq.holds,
        mfcq_vector: mfcq.vector,
        dual_violation: dual.violation,
        equality_rank_ok: mfcq.equality_rank_ok,
        active_set: prob.active_set(p, tol.act_tol)?,
        tolerances: tol,
        seed,
        primal_dual_agree: mfcq.holds == dual.holds,
    })
}

/// `<grad g_i, v> <= -1` on active `i` and `|<grad h_j, v>| <= 1e-10`, both
/// up to rounding relative to `|v|`.
pub fn is_mfcq_vector(prob: &ConstrainedProblem, p: &Point, v: &TangentVector, act_tol: f64) -> Result<bool> {
    let active = prob.active_set(p, act_tol)?;
    let slack = 1e-9 * v.norm().max(1.0);
    for &i in &active.active {
        let g = prob.inequalities()[i].gradient(p)?;
        if manifold::inner(&g, v)? > -1.0 + slack * g.norm().max(1.0) {
            return Ok(false);
        }
    }
    for h in prob.equalities() {
        let g = h.gradient(p)?;
        if manifold::inner(&g, v)?.abs() > 1e-10 * v.norm().max(1.0) * g.norm().max(1.0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Membership of `v` in the linearizing cone: `<grad g_i, v> <= eps` for
/// active `i` and `|<grad h_j, v>| <= eps`, with `eps = tol_lin * max(1, |v|)`.
pub fn linearizing_cone_contains(
    prob: &ConstrainedProblem,
    p: &Point,
    v: &TangentVector,
    act_tol: f64,
    tol_lin: f64,
) -> Result<bool> {
    if !v.base().approx_eq(p) {
        return Err(Error::IncompatibleTangentSpaces);
    }
    let bound = tol_lin * v.norm().max(1.0);
    let active = prob.active_set(p, act_tol)?;
    for &i in &active.active {
        if manifold::inner(&prob.inequalities()[i].gradient(p)?, v)? > bound {
            return Ok(false);
        }
    }
    for h in prob.equalities() {
        if manifold::inner(&h.gradient(p)?, v)?.abs() > bound {
            return Ok(false);
        }
    }
    Ok(true)
}

/// LICQ on coordinate columns `[eq | active]`.
pub(crate) fn licq_columns(active: &DMatrix<f64>, eq: &DMatrix<f64>, rank_tol: f64) -> ColumnRank {
    linalg::column_rank(&hstack(eq, active), rank_tol)
}

/// Equality rank verdict and, when MFCQ holds, a solution of the LP.
pub(crate) fn mfcq_vector_coords(
    active: &DMatrix<f64>,
    eq: &DMatrix<f64>,
    rank_tol: f64,
) -> (bool, Option<DVector<f64>>) {
    let equality_rank_ok = linalg::column_rank(eq, rank_tol).full;
    if !equality_rank_ok {
        return (false, None);
    }
    let d = active.nrows().max(eq.nrows());
    let (na, q) = (active.ncols(), eq.ncols());
    // variables [v+ (d), v- (d), slack (na)], rows: active then equality
    let mut a = DMatrix::zeros(na + q, 2 * d + na);
    let mut b = DVector::zeros(na + q);
    for i in 0..na {
        for k in 0..d {
            a[(i, k)] = active[(k, i)];
            a[(i, d + k)] = -active[(k, i)];
        }
        a[(i, 2 * d + i)] = 1.0;
        b[i] = -1.0;
    }
    for j in 0..q {
        for k in 0..d {
            a[(na + j, k)] = eq[(k, j)];
            a[(na + j, d + k)] = -eq[(k, j)];
        }
    }
    match linalg::feasible_point(&a, &b) {
        LpOutcome::Feasible(x) => {
            let v = DVector::from_fn(d, |k, _| x[k] - x[d + k]);
            (true, Some(v))
        }
        LpOutcome::Infeasible { .. } => (true, None),
    }
}

/// Nonzero unit-norm solution of `active mu + eq lambda = 0`, `mu >= 0`, if
/// one exists.
///
/// With independent equality gradients any nonzero solution has some
/// `mu_i > 0`; scaling it to `mu_i = 1` leaves a sign-constrained least
/// squares problem per index `i`.
pub(crate) fn positive_dependence(
    active: &DMatrix<f64>,
    eq: &DMatrix<f64>,
    rank_tol: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let na = active.ncols();
    if !linalg::column_rank(eq, rank_tol).full {
        let gram = eq.transpose() * eq;
        let eig = SymmetricEigen::new(gram);
        let k = eig.eigenvalues.argmin().0;
        let lambda: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        return Some((vec![0.0; na], lambda));
    }
    let scale = active.column_iter().chain(eq.column_iter()).map(|c| c.norm()).fold(1.0, f64::max);
    for i in 0..na {
        let others: Vec<usize> = (0..na).filter(|&k| k != i).collect();
        let rest = hstack(&active.select_columns(others.iter()), eq);
        let nonneg: Vec<bool> = (0..rest.ncols()).map(|j| j < others.len()).collect();
        let target = -active.column(i);
        let sol = sign_constrained_lsq(&rest, &target, &nonneg);
        if sol.residual.norm() <= DUAL_TOL * scale {
            let mut mu = vec![0.0; na];
            mu[i] = 1.0;
            for (k, &j) in others.iter().enumerate() {
                mu[j] = sol.x[k];
            }
            let lambda: Vec<f64> = sol.x.iter().skip(others.len()).copied().collect();
            let norm = mu.iter().chain(&lambda).map(|x| x * x).sum::<f64>().sqrt();
            return Some((mu.iter().map(|x| x / norm).collect(), lambda.iter().map(|x| x / norm).collect()));
        }
    }
    None
}

/// Approximate tangent-cone members at a feasible point.
#[derive(Debug, Clone)]
pub struct TangentConeSample {
    pub samples: Vec<TangentVector>,
    /// Smallest step of the tangential sequences; the samples are accurate to
    /// `O(t_min)`.
    pub t_min: f64,
    pub seed: u64,
    pub diagnostic: Option<String>,
}

const SAMPLE_STEPS: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
const RESTORE_TOL: f64 = 1e-14;

/// Builds tangential sequences `p_k -> p` inside the feasible set and
/// returns their difference quotients in a normal chart at `p`.
///
/// Each sequence starts from a random chart direction `u`, steps to
/// `chart^-1(t u)` and restores feasibility with minimum-norm Newton steps
/// on the violated constraints. Directions whose restoration fails are
/// rejected and redrawn, within a budget of `20 * n_samples` draws.
pub fn sample_tangent_cone(
    prob: &ConstrainedProblem,
    p: &Point,
    n_samples: usize,
    seed: u64,
    act_tol: f64,
) -> Result<TangentConeSample> {
    require_feasible(prob, p, act_tol)?;
    let radius = 1.0_f64.min(0.5 * p.manifold().injectivity_radius());
    let chart = Chart::normal(p.clone(), radius)?;
    let d = chart.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_samples);
    let budget = 20 * n_samples.max(1);
    let mut rejected = 0usize;
    let t_min = SAMPLE_STEPS[SAMPLE_STEPS.len() - 1];

    for _ in 0..budget {
        if samples.len() == n_samples {
            break;
        }
        let mut u = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = u.norm();
        if norm < 1e-12 {
            continue;
        }
        u /= norm;
        let mut quotient = None;
        for &t in &SAMPLE_STEPS {
            let q = chart.backward(&(&u * t))?;
            let Some(q) = restore_feasibility(prob, &q)? else {
                quotient = None;
                break;
            };
            quotient = Some(chart.forward(&q)? / t);
        }
        match quotient {
            Some(x) => samples.push(chart.tangent_from_coords(&x)?),
            None => rejected += 1,
        }
    }
    let diagnostic = if samples.is_empty() {
        Some(format!("no feasible neighbours found after {budget} draws"))
    } else if samples.len() < n_samples {
        Some(format!("only {} of {n_samples} samples; {rejected} directions rejected", samples.len()))
    } else {
        None
    };
    Ok(TangentConeSample { samples, t_min, seed, diagnostic })
}

/// Newton-type projection onto the feasible set: repeatedly takes the
/// minimum-norm tangent step zeroing the violated constraints to first order.
fn restore_feasibility(prob: &ConstrainedProblem, start: &Point) -> Result<Option<Point>> {
    let mut q = start.clone();
    for _ in 0..50 {
        let g = prob.inequality_values(&q)?;
        let h = prob.equality_values(&q)?;
        let violation = g.iter().map(|v| v.max(0.0)).chain(h.iter().map(|v| v.abs())).fold(0.0, f64::max);
        if violation <= RESTORE_TOL {
            return Ok(Some(q));
        }
        let mut rows: Vec<DVector<f64>> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        for (field, value) in prob.inequalities().iter().zip(&g) {
            if *value > 0.0 {
                rows.push(field.gradient(&q)?.vec().clone());
                rhs.push(-value);
            }
        }
        for (field, value) in prob.equalities().iter().zip(&h) {
            rows.push(field.gradient(&q)?.vec().clone());
            rhs.push(-value);
        }
        let n = q.coords().len();
        let mut jac = DMatrix::zeros(rows.len(), n);
        for (i, r) in rows.iter().enumerate() {
            jac.set_row(i, &r.transpose());
        }
        let step = linalg::lstsq(&jac, &DVector::from_vec(rhs));
        if !step.iter().all(|s| s.is_finite()) || step.norm() == 0.0 {
            return Ok(None);
        }
        let step = manifold::tangent_project_vec(&q, step);
        q = manifold::exp_unchecked(&q, step.vec());
    }
    Ok(None)
}
