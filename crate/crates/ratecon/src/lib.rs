//! Rate-optimal lossy compression schedules for distributed average consensus.
//!
//! The library evolves exact network-state statistics (mean, covariance, MSE)
//! under the mean-preserving consensus update `z(t+1) = z(t) + (W - I) Q(z(t))`
//! with an additive quantization noise model, minimizes the aggregate coding
//! rate subject to a final-MSE constraint by solving a generalized geometric
//! program in log-sum-exp form, searches integer fixed-rate schedules on a
//! trellis around the relaxed optimum, and validates everything with a Monte
//! Carlo consensus simulator using real dithered quantizers.
//!
//! All numeric code is generic over the scalar type via [`Real`]; concrete
//! `f64` aliases are exported at the crate root and used by the CLI.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub mod error;
pub mod gauss;
pub mod ggp;
pub mod graph;
pub mod heuristic;
pub mod linalg;
pub mod quantizers;
pub mod rd_models;
pub mod rng;
pub mod simulator;
pub mod state_evolution;
pub mod stats;

pub use error::Error;

/// Scalar type the numeric core is generic over: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Send + Sync + fmt::Debug + fmt::Display + 'static
{
    /// Lossy conversion from an `f64` literal; panics only for non-finite
    /// values that the target type cannot represent.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant not representable in scalar type")
    }

    /// Widening conversion for accumulation and reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Matrix64 = linalg::Matrix<f64>;
pub type Topology64 = graph::Topology<f64>;
pub type WeightMatrix64 = graph::WeightMatrix<f64>;
pub type DistortionSchedule64 = state_evolution::DistortionSchedule<f64>;
pub type RdModel64 = rd_models::RdModel<f64>;
pub type RateAllocation64 = ggp::RateAllocation<f64>;
pub type IntegerSchedule64 = heuristic::IntegerSchedule<f64>;
pub type SimConfig64 = simulator::SimConfig<f64>;
pub type SimResult64 = simulator::SimResult<f64>;
