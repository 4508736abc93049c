//! Numerical weak KAM / Aubry-Mather toolkit for Tonelli Lagrangians
//! `L(x, v) = ½ g_x(v, v) − f(x) − ω(v) + c` on flat-chart n-tori.
//!
//! The crate is generic over the scalar type through [`Real`]; the `*64`
//! aliases below fix `f64`, which is what the CLI and the acceptance
//! experiments use.

pub mod builtins;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod io;
pub mod riccati;
pub mod scalar;
pub mod variation;
pub mod weakkam;

pub use error::{Error, Result};
pub use scalar::Real;

/// Concrete `f64` aliases for the main domain types.
pub type ChartPoint64 = geometry::ChartPoint<f64>;
pub type MetricField64 = geometry::MetricField<f64>;
pub type ScalarField64 = geometry::ScalarField<f64>;
pub type ClosedOneForm64 = geometry::ClosedOneForm<f64>;
