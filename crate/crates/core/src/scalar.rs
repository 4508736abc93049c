//! Scalar abstraction: the whole toolkit is generic over the floating-point
//! type through [`Real`], with `f64` aliases exported at the crate root.

use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar usable everywhere in the toolkit (`f32` or `f64`).
///
/// `nalgebra::RealField` supplies field arithmetic and elementary functions,
/// the `num-traits` bounds supply literal conversion.
pub trait Real: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy {
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn of(v: f64) -> Self {
        nalgebra::convert(v)
    }

    /// Lossy view as `f64`, for diagnostics and serialized reports.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
