use thiserror::Error;

/// Errors raised across the crate. Each variant name is what the CLI reports
/// in its stderr JSON.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no interior point found in the bounding box")]
    EmptyDomain,
    #[error("field is singular at the evaluation point: {0}")]
    SingularPoint(String),
    #[error("sample {index} is singular: {reason}")]
    SingularSample { index: usize, reason: String },
    #[error("gradient norm {norm:e} is at or below the threshold {tol:e}")]
    ZeroGradient { norm: f64, tol: f64 },
    #[error("geometry violation: {0}")]
    GeometryViolation(String),
    #[error("north-pole radius {radius} does not exceed n + p - 2 = {bound}")]
    RadiusTooSmall { radius: f64, bound: f64 },
    #[error("no admissible time depth found down to {min_tau:e}")]
    NoAdmissibleTau { min_tau: f64 },
    #[error("resolution too coarse: alpha_1 = {alpha1} is not below 1 - {tol}")]
    ResolutionTooCoarse { alpha1: f64, tol: f64 },
    #[error("time step {dt:e} exceeds the stability bound {bound:e}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("grid functions live on different grids")]
    GridMismatch,
    #[error("{0} is not a boundary point of the domain")]
    NotABoundaryPoint(String),
    #[error("need at least 3 usable scales for a Hölder fit, got {0}")]
    InsufficientDecades(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Variant name, used as the machine-readable error tag.
    pub fn name(&self) -> &'static str {
        match self {
            Error::EmptyDomain => "EmptyDomain",
            Error::SingularPoint(_) => "SingularPoint",
            Error::SingularSample { .. } => "SingularSample",
            Error::ZeroGradient { .. } => "ZeroGradient",
            Error::GeometryViolation(_) => "GeometryViolation",
            Error::RadiusTooSmall { .. } => "RadiusTooSmall",
            Error::NoAdmissibleTau { .. } => "NoAdmissibleTau",
            Error::ResolutionTooCoarse { .. } => "ResolutionTooCoarse",
            Error::CflViolation { .. } => "CFLViolation",
            Error::GridMismatch => "GridMismatch",
            Error::NotABoundaryPoint(_) => "NotABoundaryPoint",
            Error::InsufficientDecades(_) => "InsufficientDecades",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Precondition(_) => "Precondition",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
