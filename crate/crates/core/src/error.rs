use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("density matrix trace is {0}, expected 1")]
    NonUnitTrace(f64),

    #[error("state norm is {0}, expected 1")]
    NotNormalized(f64),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("need at least {need} levels, got {got}")]
    TooFewLevels { need: usize, got: usize },

    #[error("eigenvalues must be strictly descending")]
    NotDescending,

    #[error("argument must be nonnegative, got {0}")]
    Negative(f64),

    #[error("ensemble kind {0} not valid for this operation")]
    WrongEnsembleKind(String),

    #[error("operator is zero")]
    ZeroOperator,

    #[error("matrix is singular or zero")]
    Singular,

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("dimension {d} does not factor as {da} x {db}")]
    NonFactorizable { d: usize, da: usize, db: usize },

    #[error(
        "positivity projection hit the iteration cap ({iterations}); objective {objective:e}, gradient norm {grad_norm:e}"
    )]
    ProjectionNotConverged {
        iterations: usize,
        objective: f64,
        grad_norm: f64,
    },
}
