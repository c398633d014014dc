use thiserror::Error;

use crate::fusion::WeightsError;
use crate::wire::WireError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("placement-exhausted: placed {placed} of {requested} objects")]
    PlacementExhausted { placed: usize, requested: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("degenerate box: {0}")]
    DegenerateBox(String),
    #[error("probability {0} outside the clamped domain")]
    Domain(f64),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
