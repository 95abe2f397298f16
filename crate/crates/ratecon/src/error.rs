use thiserror::Error;

/// Errors produced by the library. Values are reported as `f64` regardless of
/// the scalar type the computation ran in.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("graph is disconnected or has no edges; consensus cannot converge")]
    Disconnected,

    #[error("could not generate a connected topology after {0} attempts")]
    GenerationFailed(usize),

    #[error("target MSE {target} is infeasible: lossless floor is {floor}")]
    InfeasibleTarget { target: f64, floor: f64 },

    #[error("target MSE not reachable within {0} iterations")]
    InfeasibleHorizon(usize),

    #[error("no feasible candidate in T range {0:?}")]
    InfeasibleSweep(std::ops::Range<usize>),

    #[error("enumeration guard exceeded: {0} sequences")]
    SearchTooLarge(u64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
