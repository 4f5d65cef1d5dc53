use std::f64::consts::FRAC_PI_8;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use manikkt_core::data::{sample_ball, write_points_csv};
use manikkt_core::manifold::{self, tangent_basis};
use manikkt_core::{
    cq_report, cross_chart_consistency, find_multipliers, frechet_objective, gradient_descent, project_ball,
    projected_gradient_descent, Chart, ConstrainedProblem, ManifoldKind, Point, StopReason,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::{numeric, Failure};

/// Relative tolerance for the chart cross-check in `cq-check`.
const CHART_REL_TOL: f64 = 1e-9;

pub fn gen_data(seed: u64, n: usize, center: &[f64], radius: f64, out: &Path) -> Result<i32, Failure> {
    if n == 0 {
        return Err(Failure::Config("--n must be positive".into()));
    }
    let manifold = ManifoldKind::sphere(center.len()).map_err(|e| Failure::Config(e.to_string()))?;
    let c = Point::from_slice(manifold, center).map_err(|e| Failure::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = sample_ball(&c, radius, n, &mut rng).map_err(|e| Failure::Config(e.to_string()))?;
    let mut buf = Vec::new();
    write_points_csv(&mut buf, &points).map_err(numeric)?;
    write_file(out, &buf)?;
    log::info!("wrote {n} points to {}", out.display());
    Ok(0)
}

pub struct SolveArgs {
    pub trace: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub digits: Option<usize>,
}

/// Unconstrained mean, then the constrained mean from the first data point.
/// Exits 4 when either run stops without meeting the tolerance; the outputs
/// are still written.
pub fn solve(cfg: &RunConfig, args: SolveArgs) -> Result<i32, Failure> {
    let data = cfg.load_data()?;
    let prob = cfg.problem(&data)?;
    if prob.num_inequalities() != 1 || prob.num_equalities() != 0 {
        return Err(Failure::Config("solve needs exactly one inequality constraint".into()));
    }
    let ball = prob.inequalities()[0].ball().cloned().expect("configured constraints are balls");
    let scfg = cfg.solver_config()?;
    let p0 = &data[0];

    let mean_trace = gradient_descent(&frechet_objective(&data).map_err(numeric)?, &scfg, p0).map_err(numeric)?;
    let p_bar = mean_trace.final_point.clone();
    let trace = projected_gradient_descent(&prob, &scfg, p0).map_err(numeric)?;
    let p_star = trace.final_point.clone();
    let proj = project_ball(&ball.center, ball.radius, &p_bar).map_err(numeric)?;
    let g_star = prob.inequalities()[0].value(&p_star).map_err(numeric)?;
    let last = trace.last();

    let result = json!({
        "seed": cfg.seed,
        "n_data": data.len(),
        "center": ball.center,
        "radius": ball.radius,
        "mean": p_bar,
        "mean_converged": mean_trace.converged,
        "solution": p_star,
        "projected_mean": proj,
        "dist_solution_projected_mean": manifold::dist(&p_star, &proj).map_err(numeric)?,
        "dist_solution_mean": manifold::dist(&p_star, &p_bar).map_err(numeric)?,
        "f_solution": prob.objective().value(&p_star).map_err(numeric)?,
        "active": g_star >= -scfg.act_tol,
        "mu": last.mu_est[0],
        "n_sq": last.n_sq,
        "iterations": last.k,
        "converged": trace.converged,
        "stop_reason": stop_reason(trace.stop_reason),
        "solver": scfg,
    });

    if let Some(path) = args.trace.or_else(|| cfg.output.trace.as_ref().map(|p| cfg.resolve(p))) {
        let mut buf = Vec::new();
        trace.write_csv(&mut buf, args.digits.or(cfg.output.digits)).map_err(numeric)?;
        write_file(&path, &buf)?;
    }
    let text = to_json(&result)?;
    match args.out.or_else(|| cfg.output.result.as_ref().map(|p| cfg.resolve(p))) {
        Some(path) => write_file(&path, text.as_bytes())?,
        None => emit(&text),
    }
    if trace.converged && mean_trace.converged {
        Ok(0)
    } else {
        log::warn!("stopped without meeting stop_tol: {:?}", trace.stop_reason);
        Ok(4)
    }
}

/// Exit 0 with certified multipliers, 5 with a certified witness, 6 when the
/// point is infeasible.
pub fn kkt_check(cfg: &RunConfig, point: &[f64]) -> Result<i32, Failure> {
    let (prob, p) = checked_point(cfg, point)?;
    if let Some(code) = infeasible(cfg, &prob, &p)? {
        return Ok(code);
    }
    let report = find_multipliers(&prob, &p, cfg.kkt_tolerances()).map_err(numeric)?;
    let (status, code) = if report.multipliers.is_some() { ("kkt", 0) } else { ("witness", 5) };
    let mut out = to_value(&report)?;
    insert(&mut out, "point", to_value(&p)?);
    insert(&mut out, "status", json!(status));
    emit(&to_json(&out)?);
    Ok(code)
}

/// Exit 0 when the primal and dual MFCQ tests agree and the two charts
/// reproduce the intrinsic verdicts; 4 otherwise; 6 when infeasible.
pub fn cq_check(cfg: &RunConfig, point: &[f64]) -> Result<i32, Failure> {
    let (prob, p) = checked_point(cfg, point)?;
    if let Some(code) = infeasible(cfg, &prob, &p)? {
        return Ok(code);
    }
    let report = cq_report(&prob, &p, cfg.cq_tolerances(), Some(cfg.seed)).map_err(numeric)?;
    let radius = 1.0_f64.min(0.5 * p.manifold().injectivity_radius());
    let chart_a = Chart::normal(p.clone(), radius).map_err(numeric)?;
    let offset = tangent_basis(&p)[0].scale(FRAC_PI_8);
    let chart_b = Chart::normal(manifold::exp(&p, &offset).map_err(numeric)?, radius).map_err(numeric)?;
    let charts = cross_chart_consistency(&prob, &p, &chart_a, &chart_b, cfg.kkt_tolerances(), cfg.cq_tolerances())
        .map_err(numeric)?;
    let consistent = charts.is_consistent(CHART_REL_TOL);

    let mut out = to_value(&report)?;
    insert(&mut out, "primal_dual_agree", json!(report.primal_dual_agree));
    insert(&mut out, "chart_consistency", to_value(&charts)?);
    insert(&mut out, "charts_consistent", json!(consistent));
    insert(&mut out, "point", to_value(&p)?);
    emit(&to_json(&out)?);
    Ok(if report.primal_dual_agree && consistent { 0 } else { 4 })
}

fn checked_point(cfg: &RunConfig, point: &[f64]) -> Result<(ConstrainedProblem, Point), Failure> {
    let data = cfg.load_data()?;
    let prob = cfg.problem(&data)?;
    Ok((prob, cfg.point(point)?))
}

/// Prints the feasibility report and returns exit code 6 for an infeasible
/// point.
fn infeasible(cfg: &RunConfig, prob: &ConstrainedProblem, p: &Point) -> Result<Option<i32>, Failure> {
    let feas = prob.feasibility(p, cfg.solver.act_tol).map_err(numeric)?;
    if feas.feasible {
        return Ok(None);
    }
    let out = json!({ "status": "infeasible", "point": p, "feasibility": feas });
    emit(&to_json(&out)?);
    log::warn!("point is infeasible (max violation {:e})", feas.max_violation);
    Ok(Some(6))
}

fn stop_reason(r: StopReason) -> &'static str {
    match r {
        StopReason::Tolerance => "tolerance",
        StopReason::MaxIters => "max_iters",
        StopReason::Stagnation => "stagnation",
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, Failure> {
    serde_json::to_value(v).map_err(|e| Failure::Numeric(e.to_string()))
}

fn insert(obj: &mut Value, key: &str, v: Value) {
    if let Value::Object(map) = obj {
        map.insert(key.to_owned(), v);
    }
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    if let Err(e) = writeln!(out, "{text}").and_then(|_| out.flush()) {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            log::warn!("stdout: {e}");
        }
    }
}

/// Keys come out sorted because `serde_json::Map` is ordered by key.
fn to_json(v: &Value) -> Result<String, Failure> {
    serde_json::to_string_pretty(v).map_err(|e| Failure::Numeric(e.to_string()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes).and_then(|_| w.flush()).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}
