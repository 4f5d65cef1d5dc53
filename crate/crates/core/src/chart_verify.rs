//! Euclidean transcriptions of a manifold problem through a chart, used to
//! cross-check gradients, KKT residuals and CQ verdicts.
//!
//! In chart coordinates the partial derivatives of `F = f o chart^-1` are
//! `J^T grad f`, where `J` is the ambient Jacobian of the inverse chart, and
//! the pulled-back metric is `G = J^T J`. Stationarity norms in a chart are
//! measured in the `G^-1` norm, which is the intrinsic norm of the gradient.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::chart::Chart;
use crate::cq::{self, CqTolerances};
use crate::error::{Error, Result};
use crate::kkt::{self, KktTolerances, Multipliers};
use crate::local::{columns, LocalSystem};
use crate::manifold::{Point, TangentVector};
use crate::problem::{ConstrainedProblem, ScalarField};

/// Default relative FD step; the step for coordinate `i` is
/// `h * max(1, |x_i|)`.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// A problem expressed on the coordinate domain of a chart.
#[derive(Clone)]
pub struct TranscribedProblem {
    chart: Chart,
    prob: ConstrainedProblem,
}

pub fn transcribe(prob: &ConstrainedProblem, chart: &Chart) -> TranscribedProblem {
    TranscribedProblem { chart: chart.clone(), prob: prob.clone() }
}

impl TranscribedProblem {
    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn f_x(&self, x: &DVector<f64>) -> Result<f64> {
        self.prob.objective().value(&self.chart.backward(x)?)
    }

    pub fn g_x(&self, i: usize, x: &DVector<f64>) -> Result<f64> {
        self.field_value(self.prob.inequalities().get(i), x)
    }

    pub fn h_x(&self, j: usize, x: &DVector<f64>) -> Result<f64> {
        self.field_value(self.prob.equalities().get(j), x)
    }

    fn field_value(&self, field: Option<&ScalarField>, x: &DVector<f64>) -> Result<f64> {
        let field = field.ok_or_else(|| Error::InvalidArgument("constraint index out of range".into()))?;
        field.value(&self.chart.backward(x)?)
    }

    /// Chain-rule partials `J^T grad f` of the transcribed objective.
    pub fn objective_partials(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        partials(&self.chart, self.prob.objective(), x)
    }
}

fn partials(chart: &Chart, field: &ScalarField, x: &DVector<f64>) -> Result<DVector<f64>> {
    let p = chart.backward(x)?;
    let jac = chart.inverse_jacobian(x)?;
    Ok(jac.tr_mul(field.gradient(&p)?.vec()))
}

/// Pushes coordinate partials back to a tangent vector at `chart^-1(x)`:
/// `J G^-1 dF`.
fn pushforward_gradient(jac: &DMatrix<f64>, p: &Point, dfx: &DVector<f64>) -> Result<TangentVector> {
    let metric = jac.tr_mul(jac);
    let chol =
        metric.cholesky().ok_or_else(|| Error::Numerical("pulled-back metric is not positive definite".into()))?;
    let v = jac * chol.solve(dfx);
    Ok(crate::manifold::tangent_project_vec(p, v))
}

/// Relative error, in the metric norm with a floor of 1, between the
/// gradient recovered from central differences of `field o chart^-1` and
/// the analytic Riemannian gradient at `p`.
pub fn fd_gradient_check(field: &ScalarField, p: &Point, chart: &Chart, h: Option<f64>) -> Result<f64> {
    let h = h.unwrap_or(DEFAULT_FD_STEP);
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
    }
    let x = chart.forward(p)?;
    let mut dfx = DVector::zeros(x.len());
    for i in 0..x.len() {
        let hi = h * x[i].abs().max(1.0);
        let mut plus = x.clone();
        plus[i] += hi;
        let mut minus = x.clone();
        minus[i] -= hi;
        for stencil in [&plus, &minus] {
            let norm = stencil.norm();
            if norm >= chart.radius() {
                return Err(Error::ChartDomain { value: norm, radius: chart.radius() });
            }
        }
        let fp = field.value(&chart.backward(&plus)?)?;
        let fm = field.value(&chart.backward(&minus)?)?;
        dfx[i] = (fp - fm) / (plus[i] - minus[i]);
    }
    let jac = chart.inverse_jacobian(&x)?;
    let q = chart.backward(&x)?;
    let fd = pushforward_gradient(&jac, &q, &dfx)?;
    let analytic = field.gradient(p)?;
    Ok((fd.vec() - analytic.vec()).norm() / analytic.norm().max(1.0))
}

/// First-order quantities at one point, computed intrinsically or through a
/// chart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstOrderView {
    /// Minimal Lagrangian gradient norm over admissible multipliers.
    pub stationarity: f64,
    pub multipliers: Multipliers,
    pub licq: bool,
    pub sigma_min: Option<f64>,
    pub mfcq: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartConsistency {
    pub intrinsic: FirstOrderView,
    pub chart_a: FirstOrderView,
    pub chart_b: FirstOrderView,
    /// Largest relative difference of a chart stationarity norm from the
    /// intrinsic one (floor 1).
    pub stationarity_rel_diff: f64,
    /// Largest multiplier deviation from the intrinsic values; only
    /// meaningful when LICQ makes the multipliers unique.
    pub multiplier_diff: f64,
}

impl ChartConsistency {
    pub fn verdicts_agree(&self) -> bool {
        let same = |v: &FirstOrderView| v.licq == self.intrinsic.licq && v.mfcq == self.intrinsic.mfcq;
        same(&self.chart_a) && same(&self.chart_b)
    }

    /// Verdicts identical, stationarity within `rel_tol`, and under LICQ
    /// multipliers within `rel_tol` (relative, floor 1).
    pub fn is_consistent(&self, rel_tol: f64) -> bool {
        let scale = self.intrinsic.multipliers.norm().max(1.0);
        self.verdicts_agree()
            && self.stationarity_rel_diff <= rel_tol
            && (!self.intrinsic.licq || self.multiplier_diff <= rel_tol * scale)
    }
}

/// Computes stationarity, LICQ and MFCQ intrinsically and through both
/// charts. The point must be feasible and inside both chart domains.
pub fn cross_chart_consistency(
    prob: &ConstrainedProblem,
    p: &Point,
    chart_a: &Chart,
    chart_b: &Chart,
    kkt_tol: KktTolerances,
    cq_tol: CqTolerances,
) -> Result<ChartConsistency> {
    let feas = prob.feasibility(p, kkt_tol.act_tol)?;
    if !feas.feasible {
        return Err(Error::Infeasible { violation: feas.max_violation });
    }
    let sys = LocalSystem::build(prob, p, kkt_tol.act_tol)?;
    let intrinsic = view_from_coords(prob, &sys, &sys.objective, &sys.active_grads, &sys.eq_grads, cq_tol);
    let a = chart_view(prob, p, chart_a, &sys, cq_tol)?;
    let b = chart_view(prob, p, chart_b, &sys, cq_tol)?;

    let rel = |v: &FirstOrderView| (v.stationarity - intrinsic.stationarity).abs() / intrinsic.stationarity.max(1.0);
    let stationarity_rel_diff = rel(&a).max(rel(&b));
    let multiplier_diff =
        intrinsic.multipliers.max_abs_diff(&a.multipliers).max(intrinsic.multipliers.max_abs_diff(&b.multipliers));
    Ok(ChartConsistency { intrinsic, chart_a: a, chart_b: b, stationarity_rel_diff, multiplier_diff })
}

fn chart_view(
    prob: &ConstrainedProblem,
    p: &Point,
    chart: &Chart,
    sys: &LocalSystem,
    cq_tol: CqTolerances,
) -> Result<FirstOrderView> {
    let x = chart.forward(p)?;
    let jac = chart.inverse_jacobian(&x)?;
    let partial = |field: &ScalarField| -> Result<DVector<f64>> { Ok(jac.tr_mul(field.gradient(p)?.vec())) };
    let d = chart.dim();
    let df = partial(prob.objective())?;
    let dg = sys.active.active.iter().map(|&i| partial(&prob.inequalities()[i])).collect::<Result<Vec<_>>>()?;
    let dh = prob.equalities().iter().map(partial).collect::<Result<Vec<_>>>()?;
    let (dg, dh) = (columns(d, &dg), columns(d, &dh));

    // verdicts from the plain partials of the Euclidean transcription
    let licq = cq::licq_columns(&dg, &dh, cq_tol.rank_tol);
    let (_, mfcq_vec) = cq::mfcq_vector_coords(&dg, &dh, cq_tol.rank_tol);

    // multipliers and stationarity in the G^-1 norm, via whitening by the
    // Cholesky factor L of G = L L^T
    let metric = jac.tr_mul(&jac);
    let chol =
        metric.cholesky().ok_or_else(|| Error::Numerical("pulled-back metric is not positive definite".into()))?;
    let l = chol.l();
    let whiten = |m: &DMatrix<f64>| l.solve_lower_triangular(m).expect("Cholesky factor is invertible");
    let wf = whiten(&DMatrix::from_column_slice(d, 1, df.as_slice())).column(0).into_owned();
    let sol = kkt::best_multipliers(&wf, &whiten(&dg), &whiten(&dh));
    let multipliers = expand(prob, sys, &sol.mu_active, sol.lambda);
    Ok(FirstOrderView {
        stationarity: sol.residual.norm(),
        multipliers,
        licq: licq.full,
        sigma_min: licq.sigma_min,
        mfcq: mfcq_vec.is_some(),
    })
}

fn view_from_coords(
    prob: &ConstrainedProblem,
    sys: &LocalSystem,
    objective: &DVector<f64>,
    active: &DMatrix<f64>,
    eq: &DMatrix<f64>,
    cq_tol: CqTolerances,
) -> FirstOrderView {
    let licq = cq::licq_columns(active, eq, cq_tol.rank_tol);
    let (_, mfcq_vec) = cq::mfcq_vector_coords(active, eq, cq_tol.rank_tol);
    let sol = kkt::best_multipliers(objective, active, eq);
    FirstOrderView {
        stationarity: sol.residual.norm(),
        multipliers: expand(prob, sys, &sol.mu_active, sol.lambda),
        licq: licq.full,
        sigma_min: licq.sigma_min,
        mfcq: mfcq_vec.is_some(),
    }
}

fn expand(prob: &ConstrainedProblem, sys: &LocalSystem, mu_active: &[f64], lambda: Vec<f64>) -> Multipliers {
    let mut mu = vec![0.0; prob.num_inequalities()];
    for (&i, &v) in sys.active.active.iter().zip(mu_active) {
        mu[i] = v;
    }
    Multipliers::new(mu, lambda)
}
