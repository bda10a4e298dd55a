use alloc::string::String;

use crate::engine::EngineError;
use crate::measures::MeasureError;
use crate::qsd::QsdError;
use crate::spectral::SpectralError;

/// Umbrella error for callers that chain several modules.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Qsd(#[from] QsdError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Criteria(#[from] crate::criteria::CriteriaError),
    #[error("{0}")]
    Other(String),
}
