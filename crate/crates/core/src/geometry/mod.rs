//! Periodic-chart Riemannian geometry: points on the flat-chart torus,
//! metric tensors with derived Christoffel symbols and curvature, scalar
//! fields, closed 1-forms and the usual differential operators.
//!
//! All operations are pure functions of immutable inputs and safe to call
//! concurrently.

mod fields;
mod metric;
pub mod ops;
mod point;

pub use fields::{ClosedOneForm, ScalarField};
pub use metric::{Christoffel, MetricField, Riemann};
pub use point::{wrap_displacement, wrap_unit, ChartPoint};
