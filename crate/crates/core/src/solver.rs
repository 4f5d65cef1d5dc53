//! Fixed-step projected gradient descent onto a geodesic ball, and plain
//! Riemannian gradient descent.

use std::io::Write;

use serde::Serialize;

use crate::data::format_float;
use crate::error::{Error, Result};
use crate::kkt;
use crate::manifold::{self, Point, TangentVector};
use crate::problem::{ConstrainedProblem, GeodesicBall, ScalarField, DEFAULT_ACT_TOL};

/// Consecutive iterations with `|f_k - f_{k-1}| <= STAGNATION_TOL` that end a
/// run.
const STAGNATION_WINDOW: usize = 10;
const STAGNATION_TOL: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub step: f64,
    pub max_iters: usize,
    /// Threshold on `n_sq`.
    pub stop_tol: f64,
    pub act_tol: f64,
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { step: 0.5, max_iters: 1000, stop_tol: 1e-14, act_tol: DEFAULT_ACT_TOL, record_trace: true }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
            }
        };
        positive("step", self.step)?;
        positive("stop_tol", self.stop_tol)?;
        positive("act_tol", self.act_tol)?;
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub f_val: f64,
    /// Squared norm of the Lagrangian gradient at the recorded estimate.
    pub n_sq: f64,
    /// One entry per inequality; empty for unconstrained runs.
    pub mu_est: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxIters,
    Stagnation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Every iteration when `record_trace` is set, otherwise only the last.
    pub records: Vec<IterationRecord>,
    pub final_point: Point,
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl Trace {
    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("a trace holds at least one record")
    }

    /// Header `k,f,n_sq,mu`. Floats are shortest round-trip unless `digits`
    /// is given. Several multipliers are joined by `;`.
    pub fn write_csv<W: Write>(&self, mut out: W, digits: Option<usize>) -> Result<()> {
        writeln!(out, "k,f,n_sq,mu")?;
        for r in &self.records {
            let mu: Vec<String> = r.mu_est.iter().map(|m| format_float(*m, digits)).collect();
            writeln!(
                out,
                "{},{},{},{}",
                r.k,
                format_float(r.f_val, digits),
                format_float(r.n_sq, digits),
                mu.join(";")
            )?;
        }
        Ok(())
    }
}

/// `exp_c(b log_c p)` with `b = min(r / d(p, c), 1)`.
pub fn project_ball(c: &Point, r: f64, p: &Point) -> Result<Point> {
    let ball = GeodesicBall::new(c.clone(), r)?;
    project_onto(&ball, p)
}

fn project_onto(ball: &GeodesicBall, p: &Point) -> Result<Point> {
    let v = manifold::log(&ball.center, p)?;
    let d = v.norm();
    if d <= ball.radius {
        return Ok(p.clone());
    }
    Ok(manifold::exp_unchecked(&ball.center, &(v.vec() * (ball.radius / d))))
}

fn at_iterate<T>(k: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Antipodal => Error::AntipodalIterate { k },
        other => other,
    })
}

struct Recorder {
    keep_all: bool,
    records: Vec<IterationRecord>,
    quiet_steps: usize,
}

impl Recorder {
    fn new(keep_all: bool) -> Self {
        Recorder { keep_all, records: Vec::new(), quiet_steps: 0 }
    }

    /// Stores `rec` and reports whether the run has stagnated.
    fn push(&mut self, rec: IterationRecord) -> bool {
        if let Some(prev) = self.records.last() {
            if (rec.f_val - prev.f_val).abs() <= STAGNATION_TOL {
                self.quiet_steps += 1;
            } else {
                self.quiet_steps = 0;
            }
        }
        if !self.keep_all {
            self.records.clear();
        }
        self.records.push(rec);
        self.quiet_steps >= STAGNATION_WINDOW
    }
}

/// Algorithm: `p_{k+1} = proj(exp_{p_k}(-s grad f(p_k)))`.
///
/// The problem must have exactly one inequality, a ball constraint built by
/// [`crate::problem::ball_constraint`], and no equalities. Records start at
/// `k = 1`, the first projected iterate. Each record holds the raw
/// single-constraint multiplier estimate and `n_sq = |grad f + mu grad g|^2`
/// at that estimate. A run converges once `n_sq` and the certified
/// stationarity (estimate clipped at zero, zero when inactive) are both
/// within `stop_tol`.
pub fn projected_gradient_descent(prob: &ConstrainedProblem, cfg: &SolverConfig, p0: &Point) -> Result<Trace> {
    cfg.validate()?;
    if prob.num_inequalities() != 1 || prob.num_equalities() != 0 {
        return Err(Error::InvalidArgument("the solver handles a single ball constraint and no equalities".into()));
    }
    let g = &prob.inequalities()[0];
    let ball = g.ball().ok_or_else(|| Error::InvalidArgument("the inequality is not a ball constraint".into()))?;
    if p0.manifold() != prob.manifold() {
        return Err(Error::ManifoldMismatch);
    }
    let f = prob.objective();
    let mut p = p0.clone();
    let mut rec = Recorder::new(cfg.record_trace);
    for k in 1..=cfg.max_iters {
        let grad = at_iterate(k - 1, f.gradient(&p))?;
        let q = manifold::exp_unchecked(&p, &(grad.vec() * -cfg.step));
        p = at_iterate(k, project_onto(ball, &q))?;

        let grad_f = at_iterate(k, f.gradient(&p))?;
        let grad_g = at_iterate(k, g.gradient(&p))?;
        let mu = match kkt::single_constraint_estimate(&grad_f, &grad_g) {
            Ok(mu) => mu,
            Err(Error::DegenerateNormal { .. }) => 0.0,
            Err(e) => return Err(e),
        };
        let n_sq = grad_f.axpy(mu, &grad_g)?.norm_squared();
        let f_val = f.value(&p)?;
        log::debug!("k = {k}: f = {f_val:e}, n_sq = {n_sq:e}, mu = {mu:e}");
        let stagnated = rec.push(IterationRecord { k, f_val, n_sq, mu_est: vec![mu] });
        if n_sq <= cfg.stop_tol && certified_stationarity(g, &p, &grad_f, &grad_g, mu, cfg.act_tol)? <= cfg.stop_tol {
            return Ok(finish(rec, p, StopReason::Tolerance));
        }
        if stagnated {
            return Ok(finish(rec, p, StopReason::Stagnation));
        }
    }
    Ok(finish(rec, p, StopReason::MaxIters))
}

/// `|grad f + mu grad g|^2` at the clipped estimate, with `mu = 0` when the
/// constraint is inactive. The raw estimate removes the component of
/// `grad f` along `grad g` even off the boundary, so a small raw `n_sq`
/// alone does not certify an interior point.
fn certified_stationarity(
    g: &ScalarField,
    p: &Point,
    grad_f: &TangentVector,
    grad_g: &TangentVector,
    mu: f64,
    act_tol: f64,
) -> Result<f64> {
    let mu = if g.value(p)? >= -act_tol { mu.max(0.0) } else { 0.0 };
    Ok(grad_f.axpy(mu, grad_g)?.norm_squared())
}

/// Unconstrained variant: `p_{k+1} = exp_{p_k}(-s grad f(p_k))`. Records
/// start at `k = 0`, the initial point, with `n_sq = |grad f|^2`.
pub fn gradient_descent(objective: &ScalarField, cfg: &SolverConfig, p0: &Point) -> Result<Trace> {
    cfg.validate()?;
    if p0.manifold() != objective.manifold() {
        return Err(Error::ManifoldMismatch);
    }
    let mut p = p0.clone();
    let mut rec = Recorder::new(cfg.record_trace);
    for k in 0..=cfg.max_iters {
        let grad = at_iterate(k, objective.gradient(&p))?;
        let n_sq = grad.norm_squared();
        let f_val = objective.value(&p)?;
        let stagnated = rec.push(IterationRecord { k, f_val, n_sq, mu_est: Vec::new() });
        if n_sq <= cfg.stop_tol {
            return Ok(finish(rec, p, StopReason::Tolerance));
        }
        if stagnated {
            return Ok(finish(rec, p, StopReason::Stagnation));
        }
        if k < cfg.max_iters {
            p = manifold::exp_unchecked(&p, &(grad.vec() * -cfg.step));
        }
    }
    Ok(finish(rec, p, StopReason::MaxIters))
}

fn finish(rec: Recorder, final_point: Point, stop_reason: StopReason) -> Trace {
    Trace { records: rec.records, final_point, converged: stop_reason == StopReason::Tolerance, stop_reason }
}
