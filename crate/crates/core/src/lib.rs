//! Accessibility-driven remediation of bus networks after a rail disruption.

pub mod accessibility;
pub mod cli;
pub mod disruption;
pub mod fixtures;
pub mod full_ip;
pub mod geometry;
pub mod net_model;
pub mod pipeline;
pub mod report;
pub mod router;
pub mod scalar;
pub mod scenario;
pub mod stage1;
pub mod stage2;
pub mod tessellation;

pub use scalar::{Coefficient, Scalar};

/// Network over `f64`, the default precision.
pub type Network = net_model::TransitNetwork<f64>;
/// Network over `f32`.
pub type NetworkF32 = net_model::TransitNetwork<f32>;
/// Allocation problem with exact rational coefficients.
pub type ExactAllocationProblem = stage2::AllocationProblem<num_rational::Rational64>;
