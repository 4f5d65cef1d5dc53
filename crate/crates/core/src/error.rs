use thiserror::Error;

/// Errors raised by geometry, verification and solver routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid manifold: {0}")]
    InvalidManifold(String),

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("points live on different manifolds")]
    ManifoldMismatch,

    #[error("tangent vectors belong to different tangent spaces")]
    IncompatibleTangentSpaces,

    #[error("vector is not tangent at its base point (normal component {0:e})")]
    NotTangent(f64),

    #[error("points are antipodal; the minimizing geodesic is not unique")]
    Antipodal,

    #[error("outside the chart domain: {value} >= radius {radius}")]
    ChartDomain { value: f64, radius: f64 },

    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("invalid radius {0}")]
    InvalidRadius(f64),

    #[error("point is infeasible (max violation {violation:e}); check feasibility first")]
    Infeasible { violation: f64 },

    #[error("active constraint {index} has a vanishing gradient")]
    DegenerateNormal { index: usize },

    #[error("{count} constraints exceed the enumeration cap of {cap}")]
    TooManyConstraints { count: usize, cap: usize },

    #[error("iterate {k} reached the antipode of the ball center")]
    AntipodalIterate { k: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
