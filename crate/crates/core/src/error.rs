use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("argument outside domain: {0}")]
    Domain(String),
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("boundary data undersampled: {samples} samples for truncation {truncation}")]
    Undersampled { samples: usize, truncation: usize },
    #[error("grid too coarse: {0}")]
    ResolutionTooCoarse(String),
    #[error("linear solver failed: {0}")]
    SolverFailure(String),
    #[error("optimizer failed: {0}")]
    Optimizer(String),
    #[error("construction failed: {0}")]
    ConstructionFailed(String),
    #[error("could not bracket root: {0}")]
    BracketFailure(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::Domain(_)
            | Error::DegenerateDomain(_)
            | Error::UnsupportedGeometry(_)
            | Error::Undersampled { .. } => 2,
            Error::ResolutionTooCoarse(_)
            | Error::SolverFailure(_)
            | Error::Optimizer(_)
            | Error::ConstructionFailed(_)
            | Error::BracketFailure(_) => 3,
            Error::HypothesisViolated(_) => 4,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn domain_err(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
