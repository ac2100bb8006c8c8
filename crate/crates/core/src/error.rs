use thiserror::Error;

use crate::space::Point;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the pipeline can report. Variant names follow the error
/// codes used in reports (`Error::code`).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("infinite distance between points {0} and {1}")]
    InfiniteDistance(Point, Point),

    #[error("ambiguous geodesic between {x} and {y}: {z1} and {z2} are incomparable")]
    AmbiguousGeodesic { x: Point, y: Point, z1: Point, z2: Point },

    #[error("measure totals differ: {mu} vs {nu}")]
    InfeasibleMass { mu: f64, nu: f64 },

    #[error("no coupling of finite cost exists")]
    NoFiniteCoupling,

    #[error("negative cycle in potential relaxation (plan is not cyclically monotone)")]
    NegativeCycle,

    #[error("support is not cyclically monotone: a cycle lowers the cost by {defect}")]
    NonmonotoneInput { defect: f64 },

    #[error("branching transport relation at point {point}")]
    BranchingDetected { point: Point },

    #[error("ray relation is not an equivalence: {0:?}")]
    EquivalenceFailure([Point; 3]),

    #[error("measure puts mass {mass} outside the transport set")]
    MassOffRays { mass: f64 },

    #[error("conditional family carries no densities")]
    MissingDensity,

    #[error("F exceeds H on ray {ray}, cell {cell}")]
    OrderViolation { ray: usize, cell: usize },

    #[error("zero background density where H - F > 0 on cells {0:?}")]
    DivisionByZeroCell(Vec<(usize, usize)>),

    #[error("mass mismatch: {0} vs {1}")]
    MassMismatch(f64, f64),

    #[error("plan pair ({0}, {1}) does not lie on a single transport ray")]
    RayMismatch(Point, Point),

    #[error("point {0} is charged but lies on no ray")]
    ParamUndefined(Point),

    #[error("s_K argument {t} outside the domain for K = {k}")]
    Domain { k: f64, t: f64 },

    #[error("ray {0} lacks an initial or final point")]
    EndpointMissing(usize),

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("stage {stage}: {source}")]
    Stage { stage: &'static str, source: Box<Error> },
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "INVALID_INPUT",
            Error::InfiniteDistance(..) => "INFINITE_DISTANCE",
            Error::AmbiguousGeodesic { .. } => "AMBIGUOUS_GEODESIC",
            Error::InfeasibleMass { .. } => "INFEASIBLE_MASS",
            Error::NoFiniteCoupling => "NO_FINITE_COUPLING",
            Error::NegativeCycle => "NEGATIVE_CYCLE",
            Error::Stage { source, .. } => source.code(),
            Error::NonmonotoneInput { .. } => "NONMONOTONE_INPUT",
            Error::BranchingDetected { .. } => "BRANCHING_DETECTED",
            Error::EquivalenceFailure(_) => "EQUIVALENCE_FAILURE",
            Error::MassOffRays { .. } => "MASS_OFF_RAYS",
            Error::MissingDensity => "MISSING_DENSITY",
            Error::OrderViolation { .. } => "ORDER_VIOLATION",
            Error::DivisionByZeroCell(_) => "DIVISION_BY_ZERO_CELL",
            Error::MassMismatch(..) => "MASS_MISMATCH",
            Error::RayMismatch(..) => "RAY_MISMATCH",
            Error::ParamUndefined(_) => "PARAM_UNDEFINED",
            Error::Domain { .. } => "DOMAIN",
            Error::EndpointMissing(_) => "ENDPOINT_MISSING",
            Error::Format(_) => "FORMAT",
            Error::Io(_) => "IO",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
