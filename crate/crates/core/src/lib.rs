//! Constrained optimization on Riemannian manifolds with first-order
//! optimality and constraint-qualification certificates.
//!
//! The crate covers the Euclidean space and the unit sphere. It provides
//! geodesic geometry and normal charts ([`manifold`], [`chart`]), problem
//! descriptions ([`problem`]), KKT residuals and multiplier certificates
//! ([`kkt`]), LICQ/MFCQ tests ([`cq`]), projected gradient descent over
//! geodesic balls ([`solver`]) and chart-based cross-checks
//! ([`chart_verify`]).

pub mod chart;
pub mod chart_verify;
pub mod cq;
pub mod data;
pub mod error;
pub mod kkt;
pub mod linalg;
mod local;
pub mod manifold;
pub mod problem;
pub mod solver;

pub use chart::Chart;
pub use chart_verify::{cross_chart_consistency, fd_gradient_check, transcribe, ChartConsistency, TranscribedProblem};
pub use cq::{check_licq, check_mfcq, cq_report, linearizing_cone_contains, mfcq_dual_check, sample_tangent_cone};
pub use cq::{CqReport, CqTolerances};
pub use error::{Error, Result};
pub use kkt::Multipliers;
pub use kkt::{find_multipliers, kkt_residual, multiplier_set_analysis, KktReport, KktTolerances, MultiplierSet};
pub use manifold::{dist, exp, inner, log, tangent_project, ManifoldKind, Point, TangentVector};
pub use problem::{
    ball_constraint, frechet_objective, ActiveSet, ConstrainedProblem, FeasibilityReport, GeodesicBall, ScalarField,
};
pub use solver::{gradient_descent, project_ball, projected_gradient_descent, SolverConfig, StopReason, Trace};
