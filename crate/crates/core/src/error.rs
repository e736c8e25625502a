use thiserror::Error;

use crate::algebra::Element;
use crate::maximal::MaximalCertificate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("elements belong to different algebras")]
    AlgebraMismatch,

    /// A sampled or structural Dunford-Schwartz check exceeded its tolerance.
    #[error("certification failed: {kind} defect {defect:.3e} exceeds tolerance")]
    CertificationFailure {
        kind: &'static str,
        defect: f64,
        witness: Box<Element>,
    },

    /// No projection satisfying both bounds was found; `best` is the closest attempt.
    #[error("projection search exhausted without a valid certificate")]
    SearchExhausted { best: Box<MaximalCertificate> },

    /// A theorem hypothesis required by the requested experiment does not hold.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("numerical drift {0:.3e} exceeds tolerance")]
    Drift(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
