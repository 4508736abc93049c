//! Named built-in metrics and fields, resolvable from experiment configs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{ChartPoint, ClosedOneForm, MetricField, ScalarField};
use crate::scalar::Real;

/// Trigonometric field `amp · trig(2π·freq·x_axis)` with analytic derivatives.
///
/// `cos = true` gives the cosine profile, otherwise sine.
pub fn trig_field<T: Real>(
    dim: usize,
    amp: f64,
    axis: usize,
    freq: u32,
    cos: bool,
) -> ScalarField<T> {
    assert!(axis < dim, "field axis out of range");
    let w = T::of(std::f64::consts::TAU * freq as f64);
    let a = T::of(amp);
    let phase = move |x: &ChartPoint<T>| w * x.coord(axis);
    let value = move |x: &ChartPoint<T>| {
        let p = phase(x);
        if cos {
            a * p.cos()
        } else {
            a * p.sin()
        }
    };
    let grad = move |x: &ChartPoint<T>| {
        let p = phase(x);
        let d = if cos { -a * w * p.sin() } else { a * w * p.cos() };
        let mut g = DVector::zeros(dim);
        g[axis] = d;
        g
    };
    let hess = move |x: &ChartPoint<T>| {
        let p = phase(x);
        let d = if cos { -a * w * w * p.cos() } else { -a * w * w * p.sin() };
        let mut h = DMatrix::zeros(dim, dim);
        h[(axis, axis)] = d;
        h
    };
    ScalarField::new(value).with_gradient(grad).with_hessian(hess)
}

/// Conformal metric `g = e^{2λ} δ` with `λ = amp · sin(2πx_axis)`,
/// including analytic first derivatives.
pub fn conformal_metric<T: Real>(dim: usize, amp: f64, axis: usize) -> MetricField<T> {
    assert!(axis < dim, "metric axis out of range");
    let w = T::of(std::f64::consts::TAU);
    let a = T::of(amp);
    let lambda = move |x: &ChartPoint<T>| a * (w * x.coord(axis)).sin();
    let tensor = move |x: &ChartPoint<T>| {
        let s = (T::of(2.0) * lambda(x)).exp();
        DMatrix::from_diagonal_element(dim, dim, s)
    };
    let derivs = move |x: &ChartPoint<T>| {
        let s = (T::of(2.0) * lambda(x)).exp();
        let dlam = a * w * (w * x.coord(axis)).cos();
        (0..dim)
            .map(|k| {
                if k == axis {
                    DMatrix::from_diagonal_element(dim, dim, T::of(2.0) * dlam * s)
                } else {
                    DMatrix::zeros(dim, dim)
                }
            })
            .collect()
    };
    MetricField::new(dim, tensor).with_derivatives(derivs)
}

/// Diagonal metric `g = diag(1 + amp·sin(2πx_axis), 1, …)`; a deliberately
/// non-conformal test metric.
pub fn stretched_metric<T: Real>(dim: usize, amp: f64, axis: usize) -> MetricField<T> {
    assert!(axis < dim, "metric axis out of range");
    assert!(amp.abs() < 1.0, "stretched metric must stay positive definite");
    let w = T::of(std::f64::consts::TAU);
    let a = T::of(amp);
    let tensor = move |x: &ChartPoint<T>| {
        let mut g = DMatrix::identity(dim, dim);
        g[(0, 0)] = T::one() + a * (w * x.coord(axis)).sin();
        g
    };
    let derivs = move |x: &ChartPoint<T>| {
        (0..dim)
            .map(|k| {
                let mut d = DMatrix::zeros(dim, dim);
                if k == axis {
                    d[(0, 0)] = a * w * (w * x.coord(axis)).cos();
                }
                d
            })
            .collect()
    };
    MetricField::new(dim, tensor).with_derivatives(derivs)
}

/// Resolves a named metric: `flat`, `conformal` (params `amp`, `axis`) or
/// `stretched` (params `amp`, `axis`).
pub fn metric_by_name<T: Real>(
    name: &str,
    dim: usize,
    amp: Option<f64>,
    axis: Option<usize>,
) -> Result<MetricField<T>> {
    match name {
        "flat" => Ok(MetricField::flat(dim)),
        "conformal" => Ok(conformal_metric(dim, amp.unwrap_or(0.1), axis.unwrap_or(0))),
        "stretched" => Ok(stretched_metric(dim, amp.unwrap_or(0.2), axis.unwrap_or(1))),
        other => Err(Error::Config(format!("unknown metric '{other}'"))),
    }
}

/// Resolves a named scalar field: `zero`, `sin` or `cos` with params
/// `amp`, `axis`, `freq`.
pub fn field_by_name<T: Real>(
    name: &str,
    dim: usize,
    amp: f64,
    axis: usize,
    freq: u32,
) -> Result<ScalarField<T>> {
    match name {
        "zero" => Ok(ScalarField::zero()),
        "sin" => Ok(trig_field(dim, amp, axis, freq, false)),
        "cos" => Ok(trig_field(dim, amp, axis, freq, true)),
        other => Err(Error::Config(format!("unknown field '{other}'"))),
    }
}

/// Builds a closed 1-form from constant coefficients and an optional named
/// exact-part potential.
pub fn one_form<T: Real>(constants: &[T], phi: Option<ScalarField<T>>) -> ClosedOneForm<T> {
    ClosedOneForm::new(DVector::from_row_slice(constants), phi)
}
