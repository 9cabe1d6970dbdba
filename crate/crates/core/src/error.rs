use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {0}: must be between 1 and {max}", max = crate::lattice::MAX_DIM)]
    InvalidDimension(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty region")]
    EmptyRegion,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid vertex condition: {0}")]
    InvalidCondition(String),
    #[error("twist matrix is not unitary")]
    NonUnitaryTwist,
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("colouring does not cover the requested sites: {0}")]
    MissingMargin(String),
    #[error("window leaves the sampled domain")]
    OutOfDomain,
    #[error("mesh cannot be aligned: {0}")]
    MisalignedMesh(String),
    #[error("factorization broke down near lambda = {0}")]
    FactorizationBreakdown(f64),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("oracle precondition violated: {0}")]
    OracleUnsupported(String),
    #[error("ranges do not match: {0}")]
    RangeMismatch(String),
    #[error("region nesting violated: {0}")]
    MarginViolation(String),
    #[error("graph shape not supported by this experiment: {0}")]
    WrongShape(String),
}

pub type Result<T> = std::result::Result<T, Error>;
