use thiserror::Error;

use crate::sphere::Dim;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("latitude {0} is outside [-90, 90] degrees")]
    LatitudeOutOfRange(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: Dim, found: Dim },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid resolution {got} is below the minimum {min} for {dim}")]
    ResolutionTooSmall { dim: Dim, got: usize, min: usize },

    #[error("point set is empty")]
    EmptySet,

    #[error("region is empty or covers the whole space, so it has no boundary")]
    EmptyBoundary,

    #[error("degenerate region: no boundary to compare")]
    DegenerateRegion,

    #[error("unknown benchmark model `{0}`")]
    UnknownModel(String),

    #[error("unknown selector `{0}` (expected h1..h7)")]
    UnknownSelector(String),

    #[error("{selector} is not available on {dim}")]
    UnsupportedDimension { selector: &'static str, dim: Dim },

    #[error("sample needs at least {needed} points, got {got}")]
    SampleTooSmall { needed: usize, got: usize },

    #[error("data look uniform: mean resultant length {0:.3e} gives no usable concentration")]
    UniformData(f64),

    #[error("all sample points coincide; concentration diverges")]
    PointMass,

    #[error("objective is infinite at every candidate bandwidth")]
    AllInfinite,

    #[error("EM failed on every restart for k = {k}")]
    EmFailed { k: usize },

    #[error("selector h1 requires a tau level")]
    MissingTau,

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
