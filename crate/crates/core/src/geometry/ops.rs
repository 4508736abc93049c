//! Differential operators on the periodic chart: gradient, divergence,
//! Laplace-Beltrami and covariant Hessian.
//!
//! The divergence-form operators use the coordinate representation
//! `div X = (1/√det g) ∂_i(√det g X^i)` and
//! `Δf = (1/√det g) ∂_i(g^{ij} √det g ∂_j f)`, differenced centrally.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::geometry::{ChartPoint, MetricField, ScalarField};
use crate::scalar::Real;

/// Metric gradient `∇f = (df)♯` as a vector.
pub fn gradient<T: Real>(
    metric: &MetricField<T>,
    f: &ScalarField<T>,
    x: &ChartPoint<T>,
) -> Result<DVector<T>> {
    metric.sharp(x, &f.gradient(x))
}

/// Divergence of a vector field given as a closure.
pub fn divergence<T: Real>(
    metric: &MetricField<T>,
    field: &dyn Fn(&ChartPoint<T>) -> DVector<T>,
    x: &ChartPoint<T>,
    step: T,
) -> T {
    let n = metric.dim();
    let two = T::of(2.0);
    let mut s = T::zero();
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = step;
        let xp = x.translate(&e);
        e[i] = -step;
        let xm = x.translate(&e);
        let fp = metric.sqrt_det_at(&xp) * field(&xp)[i];
        let fm = metric.sqrt_det_at(&xm) * field(&xm)[i];
        s += (fp - fm) / (two * step);
    }
    s / metric.sqrt_det_at(x)
}

/// Divergence of the vector field `ω♯` for a closed 1-form.
pub fn divergence_sharp<T: Real>(
    metric: &MetricField<T>,
    omega: &crate::geometry::ClosedOneForm<T>,
    x: &ChartPoint<T>,
    step: T,
) -> Result<T> {
    metric.check_spd(x)?;
    let m = metric.clone();
    let om = omega.clone();
    Ok(divergence(
        metric,
        &move |y: &ChartPoint<T>| m.sharp(y, &om.at(y)).expect("metric degenerate along divergence stencil"),
        x,
        step,
    ))
}

/// Laplace-Beltrami operator `Δf = div ∇f` in divergence form.
pub fn laplacian<T: Real>(
    metric: &MetricField<T>,
    f: &ScalarField<T>,
    x: &ChartPoint<T>,
    step: T,
) -> Result<T> {
    metric.check_spd(x)?;
    let n = metric.dim();
    let two = T::of(2.0);
    let flux = |y: &ChartPoint<T>, i: usize| -> Result<T> {
        let ginv = metric.inverse_at(y)?;
        let sq = metric.sqrt_det_at(y);
        let df = f.gradient(y);
        let mut s = T::zero();
        for j in 0..n {
            s += ginv[(i, j)] * df[j];
        }
        Ok(s * sq)
    };
    let mut s = T::zero();
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = step;
        let fp = flux(&x.translate(&e), i)?;
        e[i] = -step;
        let fm = flux(&x.translate(&e), i)?;
        s += (fp - fm) / (two * step);
    }
    Ok(s / metric.sqrt_det_at(x))
}

/// Covariant Hessian `∇²f(e_i, e_j) = ∂_i∂_j f − Γ^k_ij ∂_k f` (symmetric).
pub fn hessian<T: Real>(
    metric: &MetricField<T>,
    f: &ScalarField<T>,
    x: &ChartPoint<T>,
) -> Result<DMatrix<T>> {
    let n = metric.dim();
    let gamma = metric.christoffel_at(x)?;
    let df = f.gradient(x);
    let mut h = f.second_partials(x);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                h[(i, j)] -= gamma.symbols[k][(i, j)] * df[k];
            }
        }
    }
    Ok(h)
}

/// Trace of the covariant Hessian with respect to `g`; equals `Δf`.
pub fn laplacian_via_hessian<T: Real>(
    metric: &MetricField<T>,
    f: &ScalarField<T>,
    x: &ChartPoint<T>,
) -> Result<T> {
    let ginv = metric.inverse_at(x)?;
    let h = hessian(metric, f, x)?;
    Ok((ginv * h).trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::{conformal_metric, trig_field};

    const TWO_PI: f64 = std::f64::consts::TAU;

    #[test]
    fn flat_laplacian_of_sine() {
        let g = MetricField::<f64>::flat(2);
        let f = trig_field(2, 1.0, 0, 1, false);
        let x = ChartPoint::from_slice(&[0.25f64, 0.0]);
        let lap = laplacian(&g, &f, &x, 1e-5).unwrap();
        // Δ sin(2πx₁) at x₁ = 0.25 is −4π² ≈ −39.4784.
        assert!((lap + 39.47841760435743).abs() < 1e-6, "{lap}");
    }

    #[test]
    fn flat_divergence_of_sine_field() {
        let g = MetricField::<f64>::flat(2);
        let x = ChartPoint::origin(2);
        let div = divergence(
            &g,
            &|y: &ChartPoint<f64>| {
                DVector::from_row_slice(&[(TWO_PI * y.coord(0)).sin(), 0.0])
            },
            &x,
            1e-5,
        );
        assert!((div - TWO_PI).abs() < 1e-8, "{div}");
    }

    #[test]
    fn constant_form_sharp_is_divergence_free_on_flat() {
        let g = MetricField::<f64>::flat(2);
        let omega = crate::geometry::ClosedOneForm::constant(DVector::from_row_slice(&[0.3, 0.4]));
        let x = ChartPoint::from_slice(&[0.6f64, 0.1]);
        let d = divergence_sharp(&g, &omega, &x, 1e-5).unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn laplacian_is_linear() {
        let g = conformal_metric(2, 0.1, 0);
        let f1 = trig_field(2, 0.3, 0, 1, false);
        let f2 = trig_field(2, 0.2, 1, 2, true);
        let combo = {
            let f1 = f1.clone();
            let f2 = f2.clone();
            ScalarField::new(move |x| 2.0 * f1.value(x) - 3.0 * f2.value(x))
        };
        let x = ChartPoint::from_slice(&[0.3f64, 0.8]);
        let l1 = laplacian(&g, &f1, &x, 1e-5).unwrap();
        let l2 = laplacian(&g, &f2, &x, 1e-5).unwrap();
        let lc = laplacian(&g, &combo, &x, 1e-5).unwrap();
        assert!((lc - (2.0 * l1 - 3.0 * l2)).abs() < 1e-6);
    }

    #[test]
    fn hessian_trace_equals_laplacian_flat() {
        let g = MetricField::<f64>::flat(2);
        let f = trig_field(2, 0.7, 0, 1, false);
        let x = ChartPoint::from_slice(&[0.37f64, 0.12]);
        let tr = laplacian_via_hessian(&g, &f, &x).unwrap();
        let lap = laplacian(&g, &f, &x, 1e-5).unwrap();
        assert!((tr - lap).abs() < 1e-5);
    }

    #[test]
    fn hessian_of_constant_vanishes_on_conformal() {
        let g = conformal_metric(2, 0.1, 0);
        let f = ScalarField::constant(3.7);
        let x = ChartPoint::from_slice(&[0.4f64, 0.9]);
        let h = hessian(&g, &f, &x).unwrap();
        assert!(h.amax() < 1e-14);
    }

    #[test]
    fn flat_hessian_of_sine() {
        let g = MetricField::<f64>::flat(2);
        let f = trig_field(2, 1.0, 0, 1, false);
        let x = ChartPoint::from_slice(&[0.15f64, 0.0]);
        let h = hessian(&g, &f, &x).unwrap();
        let exact = -TWO_PI * TWO_PI * (TWO_PI * 0.15).sin();
        assert!((h[(0, 0)] - exact).abs() < 1e-6);
        assert!(h[(0, 1)].abs() < 1e-8 && h[(1, 1)].abs() < 1e-8);
    }
}
