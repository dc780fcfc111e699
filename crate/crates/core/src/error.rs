use thiserror::Error;

use crate::geometry::{ValidityReport, Vec2};

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular matrix: columns are not linearly independent")]
    SingularMatrix,
    #[error("invalid flaw configuration:\n{0}")]
    InvalidFlawConfig(ValidityReport),
    #[error("point {point} lies outside the domain of {map}")]
    OutsideDomain { map: String, point: Vec2 },
    #[error("evaluation of {map} hit the singular point {point}")]
    SingularPoint { map: String, point: Vec2 },
    #[error("query point {point} is within {distance:e} of the curve (tolerance {tolerance:e})")]
    NearBoundary { point: Vec2, distance: f64, tolerance: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
