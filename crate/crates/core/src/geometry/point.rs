use nalgebra::DVector;

use crate::scalar::Real;

/// A point on the periodic chart of the n-torus, unit period per axis.
///
/// Coordinates are stored canonically in `[0, 1)`. Displacements between
/// points always use the minimal periodic representative, each component
/// in `[-1/2, 1/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint<T: Real> {
    coords: DVector<T>,
}

/// Wraps a raw coordinate into the canonical representative in `[0, 1)`.
#[inline]
pub fn wrap_unit<T: Real>(x: T) -> T {
    let w = x - x.floor();
    // x
    if w >= T::one() {
        T::zero()
    } else {
        w
    }
}

/// Minimal periodic representative of a raw displacement, in `[-1/2, 1/2)`.
#[inline]
pub fn wrap_displacement<T: Real>(d: T) -> T {
    let w = wrap_unit(d);
    if w >= T::of(0.5) {
        w - T::one()
    } else {
        w
    }
}

impl<T: Real> ChartPoint<T> {
    /// Builds a point from raw coordinates, canonicalizing each into `[0, 1)`.
    pub fn new(coords: DVector<T>) -> Self {
        Self {
            coords: coords.map(wrap_unit),
        }
    }

    pub fn from_slice(coords: &[T]) -> Self {
        Self::new(DVector::from_row_slice(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Self {
            coords: DVector::zeros(dim),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn coords(&self) -> &DVector<T> {
        &self.coords
    }

    #[inline]
    pub fn coord(&self, i: usize) -> T {
        self.coords[i]
    }

    /// Minimal periodic displacement from `self` to `other`, component-wise
    /// in `[-1/2, 1/2)`.
    pub fn displacement_to(&self, other: &Self) -> DVector<T> {
        DVector::from_fn(self.dim(), |i, _| {
            wrap_displacement(other.coords[i] - self.coords[i])
        })
    }

    /// Distance induced by the minimal displacement (Euclidean in the chart).
    pub fn chart_distance(&self, other: &Self) -> T {
        self.displacement_to(other).norm()
    }

    /// Returns the point translated by `delta` (re-canonicalized).
    pub fn translate(&self, delta: &DVector<T>) -> Self {
        Self::new(&self.coords + delta)
    }
}

impl<T: Real> std::fmt::Display for ChartPoint<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:.6}", c.as_f64())?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_representative_in_unit_box() {
        let p = ChartPoint::from_slice(&[1.25f64, -0.25]);
        assert!((p.coord(0) - 0.25).abs() < 1e-15);
        assert!((p.coord(1) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn displacement_is_minimal() {
        let a = ChartPoint::from_slice(&[0.9f64, 0.1]);
        let b = ChartPoint::from_slice(&[0.1f64, 0.9]);
        let d = a.displacement_to(&b);
        assert!((d[0] - 0.2).abs() < 1e-15);
        assert!((d[1] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn displacement_half_maps_to_minus_half() {
        let a = ChartPoint::from_slice(&[0.0f64, 0.0]);
        let b = ChartPoint::from_slice(&[0.5f64, 0.0]);
        let d = a.displacement_to(&b);
        assert_eq!(d[0], -0.5);
    }

    #[test]
    fn wrap_of_tiny_negative_stays_canonical() {
        let p = ChartPoint::from_slice(&[-1e-18f64]);
        assert!(p.coord(0) >= 0.0 && p.coord(0) < 1.0);
    }
}
