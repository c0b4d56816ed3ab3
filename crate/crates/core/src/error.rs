use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid range for `{name}`: lo = {lo}, hi = {hi}")]
    InvalidRange { name: String, lo: f64, hi: f64 },
    #[error("unknown dimension `{0}`")]
    UnknownDimension(String),
    #[error("duplicate dimension `{0}`")]
    DuplicateDimension(String),
    #[error("dimension count {found} does not match the declared {expected}-D parameterization")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("parameter {index} = {value} lies outside [{lo}, {hi}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("arm index {index} out of range for {arms} arms")]
    InvalidArm { index: usize, arms: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("reward {0} outside [0, 1]")]
    RewardOutOfRange(f64),
    #[error("environment failure: {0}")]
    Environment(String),
    #[error("infeasible trajectory segment {segment}: {reason}")]
    Infeasible { segment: String, reason: String },
    #[error("kernel matrix is not positive definite after jitter {0:e}")]
    SingularKernel(f64),
    #[error("unknown garment category `{0}`")]
    UnknownCategory(String),
    #[error("no training garments of category `{0}` in the prior bank")]
    EmptyPrior(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidRange { .. } => "invalid_range",
            Error::UnknownDimension(_) => "unknown_dimension",
            Error::DuplicateDimension(_) => "duplicate_dimension",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::OutOfBounds { .. } => "out_of_bounds",
            Error::InvalidArm { .. } => "invalid_arm",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NonFinite(_) => "non_finite",
            Error::RewardOutOfRange(_) => "reward_out_of_range",
            Error::Environment(_) => "environment",
            Error::Infeasible { .. } => "infeasible",
            Error::SingularKernel(_) => "singular_kernel",
            Error::UnknownCategory(_) => "unknown_category",
            Error::EmptyPrior(_) => "empty_prior",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
