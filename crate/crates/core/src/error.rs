use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("shape error: {0}")]
    ShapeError(String),

    #[error("dimension {dim} exceeds the limit {limit}")]
    DimensionLimit { dim: usize, limit: usize },

    #[error("smoothing parameter must lie in [0, 1), got {0}")]
    InvalidSmoothing(f64),

    #[error("inverse temperature must be positive, got {0}")]
    InvalidTemperature(f64),

    #[error("state does not commute with the Hamiltonian (commutator norm {0:e})")]
    NotSemiclassical(f64),

    #[error("energy {0} is not a level of the battery ladder")]
    InvalidBatteryLevel(f64),

    #[error("reference spacing {spacing} does not divide the level gaps of the Hamiltonian")]
    SpacingMismatch { spacing: f64 },

    #[error("state is not block-diagonal in total energy (commutator norm {0:e})")]
    NotIncoherent(f64),

    #[error("chain of {n} sites is shorter than the interaction support {support}")]
    ChainTooShort { n: usize, support: usize },

    #[error("unsupported structure: {0}")]
    UnsupportedStructure(String),

    #[error("invalid state family: {0}")]
    InvalidFamily(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
