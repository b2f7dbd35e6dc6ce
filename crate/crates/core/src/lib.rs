//! Simulation and verification toolkit for gradient-flow training of
//! two-layer ReLU networks from small balanced initialization.
//!
//! The core is generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases
//! below fix the common double-precision case.

pub mod analysis;
pub mod data;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod linalg;
pub mod model;
#[doc(hidden)]
pub mod oracle;
pub mod scalar;
pub mod theory;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Dataset64 = data::Dataset<f64>;
pub type NetworkState64 = model::NetworkState<f64>;
pub type TrajectoryRecord64 = analysis::TrajectoryRecord<f64>;
pub type TheoryBounds64 = theory::TheoryBounds<f64>;
pub type Margins64 = geometry::Margins<f64>;
