use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("invalid ball: {0}")]
    InvalidBall(String),
    #[error("coordinate {0} lies outside the space's domain")]
    OutsideDomain(f64),
    #[error("ball has zero measure")]
    ZeroMeasure,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("mesh: {0}")]
    Mesh(String),
    #[error("degenerate element {0} (zero length)")]
    DegenerateElement(usize),
    #[error("mesh was not generated for this ball: {0}")]
    MeshBallMismatch(String),
    #[error("trivial ball: the free node set is empty")]
    TrivialBall,
    #[error("requested {requested} eigenpairs but the free dimension is {available}")]
    TooManyEigenpairs { requested: usize, available: usize },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("eigensolver failed: {0}")]
    Solver(String),
    #[error("problem is not coercive: lambda_1 = {0:e}")]
    NonCoercive(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("spectrum is incomplete: {have} of {need} eigenpairs")]
    IncompleteSpectrum { have: usize, need: usize },
    #[error("mismatched charts: {0}")]
    ChartMismatch(String),
    #[error("space has no designated pole")]
    NoPole,
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("parameter '{name}' out of range: {reason}")]
    ParameterOutOfRange { name: String, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
