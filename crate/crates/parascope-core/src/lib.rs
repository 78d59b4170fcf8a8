//! Planning library for 3d-parallel training of large transformers.
//!
//! The crate answers three questions about a training run before anyone
//! rents a cluster:
//!
//! * what does one batch cost in compute, memory and network traffic for a
//!   given transformer shape and parallel configuration ([`cost`]),
//! * which configuration trains fastest (or cheapest under a deadline) for a
//!   given hardware profile ([`optimizer`]),
//! * do the closed-form bubble and overlap claims survive an event-level
//!   replay of the schedules ([`sim`]).
//!
//! Continuous quantities are generic over the scalar type through the
//! [`Scalar`] trait (`f32` or `f64`); counts, parallel degrees and parameter
//! counts are exact integers. The type aliases at the crate root fix the
//! scalar to `f64`, which is what the CLI and the table reproductions use.

pub mod cost;
pub mod hardware;
pub mod model;
pub mod optimizer;
pub mod scenario;
pub mod sim;
pub mod tables;

use std::fmt;

/// Floating-point scalar used for all continuous quantities.
pub trait Scalar:
    num_traits::Float + num_traits::FromPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Lossy conversion from an exact integer count.
    fn from_count(n: u128) -> Self {
        Self::from_f64(n as f64).expect("count representable")
    }

    fn from_int(n: u64) -> Self {
        Self::from_u64(n).expect("integer representable")
    }
}

impl<T> Scalar for T where
    T: num_traits::Float
        + num_traits::FromPrimitive
        + fmt::Debug
        + fmt::Display
        + Send
        + Sync
        + 'static
{
}

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid model shape: {0}")]
    InvalidShape(String),
    #[error("invalid parallel plan: {0}")]
    InvalidPlan(String),
    #[error("unknown hardware profile `{0}`")]
    UnknownProfile(String),
    #[error("unknown link class `{0}`")]
    UnknownLink(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported schedule: {0}")]
    UnsupportedSchedule(String),
    #[error("schedule graph contains a dependency cycle")]
    DependencyCycle,
    #[error("bandwidth must be positive for stream {0:?}")]
    NonPositiveBandwidth(sim::Stream),
}

pub type Result<T> = std::result::Result<T, Error>;

// Concrete f64 instantiations used by the CLI and the table reproductions.
pub type Profile = hardware::HardwareProfile<f64>;
pub type Memory = cost::MemoryBreakdown<f64>;
pub type Intensities = cost::IntensityReport<f64>;
pub type Constraints = optimizer::OptimizerConstraints<f64>;
pub type Evaluation = optimizer::PlanEvaluation<f64>;
pub type SweepReport = optimizer::SweepReport<f64>;
pub type Timeline = sim::Timeline<f64>;
