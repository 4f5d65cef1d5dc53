//! Run configuration read from a TOML file.
//!
//! Every quantity of a constrained-mean run is a key. Omitted keys take the
//! defaults: step 0.5, N = 120 generated points and the default ball on
//! `S^2`. The generated data cap defaults to a near-hemisphere around the
//! default ball centre.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};

use manikkt_core::cq::{CqTolerances, DEFAULT_RANK_TOL};
use manikkt_core::data::{read_points_file, sample_ball};
use manikkt_core::kkt::{KktTolerances, DEFAULT_KKT_TOL};
use manikkt_core::problem::DEFAULT_ACT_TOL;
use manikkt_core::{
    ball_constraint, frechet_objective, ConstrainedProblem, GeodesicBall, ManifoldKind, Point, SolverConfig,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::Failure;

/// Default ball constraint on `S^2`.
pub const DEFAULT_CENTER: [f64; 3] = [0.4319, 0.2592, 0.8639];
pub const DEFAULT_RADIUS: f64 = PI / 6.0;
pub const DEFAULT_CAP_RADIUS: f64 = FRAC_PI_2 - 0.05;
pub const DEFAULT_N: usize = 120;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub manifold: ManifoldSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default, rename = "constraint")]
    pub constraints: Vec<ConstraintSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(skip)]
    base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldName {
    Sphere,
    Euclidean,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSection {
    pub kind: ManifoldName,
    /// Ambient dimension.
    pub dim: usize,
}

impl Default for ManifoldSection {
    fn default() -> Self {
        ManifoldSection { kind: ManifoldName::Sphere, dim: 3 }
    }
}

/// Either a data file or generator settings.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub file: Option<PathBuf>,
    /// Overrides the top-level seed for generation.
    pub seed: Option<u64>,
    #[serde(default = "default_n")]
    pub n: usize,
    pub center: Option<Vec<f64>>,
    pub radius: Option<f64>,
}

fn default_n() -> usize {
    DEFAULT_N
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection { file: None, seed: None, n: DEFAULT_N, center: None, radius: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    #[default]
    Inequality,
    Equality,
}

/// `dist(p, center)^2 - radius^2`, as `<= 0` or `= 0`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSection {
    pub center: Vec<f64>,
    pub radius: f64,
    #[serde(default, rename = "type")]
    pub kind: ConstraintKind,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub step: f64,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub act_tol: f64,
    pub kkt_tol: f64,
    pub rank_tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        SolverSection {
            step: s.step,
            max_iters: s.max_iters,
            stop_tol: s.stop_tol,
            act_tol: DEFAULT_ACT_TOL,
            kkt_tol: DEFAULT_KKT_TOL,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub trace: Option<PathBuf>,
    pub result: Option<PathBuf>,
    pub digits: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), Failure> {
        self.manifold()?;
        self.solver_config()?;
        for tol in [self.solver.kkt_tol, self.solver.rank_tol] {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Failure::Config(format!("tolerances must be positive, got {tol}")));
            }
        }
        if self.data.file.is_none() && self.data.n == 0 {
            return Err(Failure::Config("data.n must be positive".into()));
        }
        self.constraint_balls()?;
        Ok(())
    }

    pub fn manifold(&self) -> Result<ManifoldKind, Failure> {
        let m = match self.manifold.kind {
            ManifoldName::Sphere => ManifoldKind::sphere(self.manifold.dim),
            ManifoldName::Euclidean => ManifoldKind::euclidean(self.manifold.dim),
        };
        m.map_err(|e| Failure::Config(e.to_string()))
    }

    fn is_default_sphere(&self) -> bool {
        self.manifold.kind == ManifoldName::Sphere && self.manifold.dim == 3
    }

    pub fn point(&self, coords: &[f64]) -> Result<Point, Failure> {
        Point::from_slice(self.manifold()?, coords).map_err(|e| Failure::Config(e.to_string()))
    }

    pub fn solver_config(&self) -> Result<SolverConfig, Failure> {
        let cfg = SolverConfig {
            step: self.solver.step,
            max_iters: self.solver.max_iters,
            stop_tol: self.solver.stop_tol,
            act_tol: self.solver.act_tol,
            record_trace: true,
        };
        cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn kkt_tolerances(&self) -> KktTolerances {
        KktTolerances { act_tol: self.solver.act_tol, kkt_tol: self.solver.kkt_tol }
    }

    pub fn cq_tolerances(&self) -> CqTolerances {
        CqTolerances { act_tol: self.solver.act_tol, rank_tol: self.solver.rank_tol }
    }

    /// Constraints in file order, with the default ball when none
    /// are given on `S^2`.
    pub fn constraint_balls(&self) -> Result<Vec<(GeodesicBall, ConstraintKind)>, Failure> {
        if self.constraints.is_empty() {
            if !self.is_default_sphere() {
                return Err(Failure::Config("at least one [[constraint]] is required off S^2".into()));
            }
            let ball = GeodesicBall::new(self.point(&DEFAULT_CENTER)?, DEFAULT_RADIUS)
                .map_err(|e| Failure::Config(e.to_string()))?;
            return Ok(vec![(ball, ConstraintKind::Inequality)]);
        }
        self.constraints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let ball = GeodesicBall::new(self.point(&c.center)?, c.radius)
                    .map_err(|e| Failure::Config(format!("constraint {i}: {e}")))?;
                Ok((ball, c.kind))
            })
            .collect()
    }

    pub fn data_path(&self) -> Option<PathBuf> {
        self.data.file.as_ref().map(|f| self.resolve(f))
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn load_data(&self) -> Result<Vec<Point>, Failure> {
        let manifold = self.manifold()?;
        if let Some(path) = self.data_path() {
            return read_points_file(&path, manifold).map_err(|e| Failure::Data(e.to_string()));
        }
        let center = match (&self.data.center, self.is_default_sphere()) {
            (Some(c), _) => self.point(c)?,
            (None, true) => self.point(&DEFAULT_CENTER)?,
            (None, false) => return Err(Failure::Config("data.center is required off S^2".into())),
        };
        let radius = match (self.data.radius, self.is_default_sphere()) {
            (Some(r), _) => r,
            (None, true) => DEFAULT_CAP_RADIUS,
            (None, false) => return Err(Failure::Config("data.radius is required off S^2".into())),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.data.seed.unwrap_or(self.seed));
        sample_ball(&center, radius, self.data.n, &mut rng).map_err(|e| Failure::Config(format!("data: {e}")))
    }

    /// Frechet objective of the data with every configured constraint.
    pub fn problem(&self, data: &[Point]) -> Result<ConstrainedProblem, Failure> {
        let objective = frechet_objective(data).map_err(|e| Failure::Data(e.to_string()))?;
        let mut ineq = Vec::new();
        let mut eq = Vec::new();
        for (ball, kind) in self.constraint_balls()? {
            let field = ball_constraint(&ball.center, ball.radius).map_err(|e| Failure::Config(e.to_string()))?;
            match kind {
                ConstraintKind::Inequality => ineq.push(field),
                ConstraintKind::Equality => eq.push(field),
            }
        }
        ConstrainedProblem::new(objective, ineq, eq).map_err(|e| Failure::Config(e.to_string()))
    }
}
