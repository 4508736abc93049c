use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{LagrangianSpec, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::ChartPoint;
use crate::scalar::Real;

/// Continuous piecewise-C² vector field along a trajectory, given as
/// breakpoints plus per-interval closures returning `(η(t), η̇(t))`.
#[derive(Clone)]
pub struct PiecewiseField<T: Real> {
    pub breakpoints: Vec<T>,
    pub pieces: Vec<Arc<dyn Fn(T) -> (DVector<T>, DVector<T>) + Send + Sync>>,
}

impl<T: Real> PiecewiseField<T> {
    pub fn smooth(
        a: T,
        b: T,
        field: impl Fn(T) -> (DVector<T>, DVector<T>) + Send + Sync + 'static,
    ) -> Self {
        Self {
            breakpoints: vec![a, b],
            pieces: vec![Arc::new(field)],
        }
    }

    pub fn span(&self) -> (T, T) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    pub fn eval(&self, t: T) -> (DVector<T>, DVector<T>) {
        let mut idx = self.pieces.len() - 1;
        for (i, w) in self.breakpoints.windows(2).enumerate() {
            if t < w[1] {
                idx = i;
                break;
            }
        }
        (self.pieces[idx])(t)
    }
}

/// Evaluated index form with the partition it was integrated over.
#[derive(Debug, Clone)]
pub struct IndexFormValue<T: Real> {
    pub value: T,
    pub partition: Vec<T>,
}

/// Second-derivative blocks of `L = ½g_ij v^i v^j − f − ω_l v^l + c` at
/// `(x, v)`: `(L_vv, L_vx, L_xx)` with `L_vx[(k, j)] = ∂²L/∂v_k∂x_j` and
/// `L_xv = L_vxᵀ`.
fn lagrangian_blocks<T: Real>(
    spec: &LagrangianSpec<T>,
    x: &ChartPoint<T>,
    v: &DVector<T>,
) -> (DMatrix<T>, DMatrix<T>, DMatrix<T>) {
    let n = spec.dim();
    let l_vv = spec.metric.at(x);
    let dg = spec.metric.partials_at(x);
    let domega = spec.form.jacobian(x);
    let mut l_vx = DMatrix::zeros(n, n);
    for k in 0..n {
        for j in 0..n {
            let mut s = T::zero();
            for i in 0..n {
                s += dg[j][(k, i)] * v[i];
            }
            l_vx[(k, j)] = s - domega[(k, j)];
        }
    }
    let d2g = spec.metric.second_partials_at(x);
    let d2f = spec.potential.second_partials(x);
    let d2omega = spec.form.second_partials(x);
    let mut l_xx = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let mut s = T::zero();
            for i in 0..n {
                for m in 0..n {
                    s += d2g[j][k][(i, m)] * v[i] * v[m];
                }
            }
            s *= T::of(0.5);
            s -= d2f[(j, k)];
            for l in 0..n {
                s -= d2omega[l][(j, k)] * v[l];
            }
            l_xx[(j, k)] = s;
        }
    }
    (l_vv, l_vx, l_xx)
}

fn simpson<T: Real>(a: T, b: T, intervals: usize, f: &dyn Fn(T) -> T) -> T {
    let m = if intervals % 2 == 0 { intervals } else { intervals + 1 };
    let h = (b - a) / T::of(m as f64);
    let mut acc = f(a) + f(b);
    for k in 1..m {
        let w = if k % 2 == 1 { T::of(4.0) } else { T::of(2.0) };
        acc += w * f(a + T::of(k as f64) * h);
    }
    acc * h / T::of(3.0)
}

/// Index form
/// `I(η, θ) = ∫ η̇ᵀ L_vv θ̇ + η̇ᵀ L_vx θ + ηᵀ L_xv θ̇ + ηᵀ L_xx θ dt`
/// along the trajectory, integrated by composite Simpson quadrature on each
/// smooth sub-interval of the merged partition.
pub fn index_form<T: Real>(
    spec: &LagrangianSpec<T>,
    traj: &Trajectory<T>,
    eta: &PiecewiseField<T>,
    theta: &PiecewiseField<T>,
) -> Result<IndexFormValue<T>> {
    let (a, b) = (traj.start_time(), traj.end_time());
    for f in [eta, theta] {
        let (fa, fb) = f.span();
        if (fa - a).abs() > T::of(1e-12) || (fb - b).abs() > T::of(1e-12) {
            return Err(Error::InvalidArgument(
                "field interval does not match the trajectory".into(),
            ));
        }
    }
    let mut partition: Vec<T> = eta
        .breakpoints
        .iter()
        .chain(theta.breakpoints.iter())
        .copied()
        .collect();
    partition.sort_by(|x, y| x.partial_cmp(y).unwrap());
    partition.dedup_by(|x, y| (*x - *y).abs() < T::of(1e-12));

    let integrand = |t: T| {
        let s = traj.interpolate(t);
        let (l_vv, l_vx, l_xx) = lagrangian_blocks(spec, &s.x, &s.v);
        let (e, de) = eta.eval(t);
        let (th, dth) = theta.eval(t);
        (de.transpose() * &l_vv * &dth)[0]
            + (de.transpose() * &l_vx * &th)[0]
            + (dth.transpose() * &l_vx * &e)[0]
            + (e.transpose() * &l_xx * &th)[0]
    };
    let mut value = T::zero();
    for w in partition.windows(2) {
        let len = w[1] - w[0];
        let intervals = ((len / traj.dt()).as_f64().ceil() as usize).max(8);
        value += simpson(w[0], w[1], intervals, &integrand);
    }
    Ok(IndexFormValue { value, partition })
}

/// Index form reduced to the parallel frame of a mechanical system:
/// `I(η, θ) = ∫ η̇·θ̇ − ηᵀ C(s) θ ds` with `C = R + ∇²f`, the synthetic
/// counterpart of [`index_form`].
pub fn index_form_reduced<T: Real>(
    coeff: &dyn Fn(T) -> DMatrix<T>,
    eta: &PiecewiseField<T>,
    theta: &PiecewiseField<T>,
    quad_step: T,
) -> IndexFormValue<T> {
    let mut partition: Vec<T> = eta
        .breakpoints
        .iter()
        .chain(theta.breakpoints.iter())
        .copied()
        .collect();
    partition.sort_by(|x, y| x.partial_cmp(y).unwrap());
    partition.dedup_by(|x, y| (*x - *y).abs() < T::of(1e-12));
    let integrand = |t: T| {
        let (e, de) = eta.eval(t);
        let (th, dth) = theta.eval(t);
        de.dot(&dth) - (e.transpose() * coeff(t) * th)[0]
    };
    let mut value = T::zero();
    for w in partition.windows(2) {
        let len = w[1] - w[0];
        let intervals = ((len / quad_step).as_f64().ceil() as usize).max(8);
        value += simpson(w[0], w[1], intervals, &integrand);
    }
    IndexFormValue { value, partition }
}

/// Boundary evaluation of the index form for piecewise Jacobi `η`:
/// `Σ_i (η̇ᵀ L_vv + ηᵀ L_xv) θ` summed over interval ends. Used to test the
/// boundary formula against the quadrature route.
pub fn index_form_boundary<T: Real>(
    spec: &LagrangianSpec<T>,
    traj: &Trajectory<T>,
    eta: &PiecewiseField<T>,
    theta: &PiecewiseField<T>,
) -> T {
    let mut total = T::zero();
    let eps = T::of(1e-9);
    for w in eta.breakpoints.windows(2) {
        let mut ends = T::zero();
        for (t_eval, sign) in [(w[1] - eps, T::one()), (w[0] + eps, -T::one())] {
            let s = traj.interpolate(t_eval);
            let (l_vv, l_vx, _) = lagrangian_blocks(spec, &s.x, &s.v);
            let (e, de) = eta.eval(t_eval);
            let (th, _) = theta.eval(t_eval);
            // (η̇ᵀ L_vv + ηᵀ L_xv) θ with L_xv = L_vxᵀ.
            let row = de.transpose() * &l_vv + e.transpose() * l_vx.transpose();
            ends += sign * (row * th)[0];
        }
        total += ends;
    }
    total
}

/// Report of the second-variation cross-check for the linear family
/// `α(t, s) = ρ(t) + s V(t)`.
#[derive(Debug, Clone)]
pub struct SecondVariationReport<T: Real> {
    pub fd_value: T,
    pub fd_value_finer: T,
    pub index_value: T,
    pub rel_error: T,
}

/// Central second difference (in the family parameter) of the action of
/// `α(t, s) = ρ(t) + s V(t)` against `I(V, V)`. Boundary corrections vanish
/// because the family is linear in `s`.
pub fn second_variation_check<T: Real>(
    spec: &LagrangianSpec<T>,
    traj: &Trajectory<T>,
    field: &PiecewiseField<T>,
) -> Result<SecondVariationReport<T>> {
    let (a, b) = (traj.start_time(), traj.end_time());
    let action_of = |s: T| {
        let integrand = |t: T| {
            let base = traj.interpolate(t);
            let (v, dv) = field.eval(t);
            let x = ChartPoint::new(base.x.coords() + &v * s);
            let vel = &base.v + &dv * s;
            spec.lagrangian(&x, &vel)
        };
        let intervals = (((b - a) / traj.dt()).as_f64().ceil() as usize).max(16);
        simpson(a, b, intervals, &integrand)
    };
    let d2 = |h: T| {
        let fp = action_of(h);
        let f0 = action_of(T::zero());
        let fm = action_of(-h);
        (fp - T::of(2.0) * f0 + fm) / (h * h)
    };
    let fd_value = d2(T::of(1e-3));
    let fd_value_finer = d2(T::of(1e-4));
    let index_value = index_form(spec, traj, field, field)?.value;
    let denom = index_value.abs().max(T::of(1e-12));
    let rel_error = (fd_value - index_value).abs() / denom;
    Ok(SecondVariationReport {
        fd_value,
        fd_value_finer,
        index_value,
        rel_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::trig_field;
    use crate::dynamics::PhaseState;
    use crate::geometry::{ClosedOneForm, MetricField, ScalarField};

    const PI: f64 = std::f64::consts::PI;

    fn sine_bump(a: f64, b: f64, axis: usize, dim: usize) -> PiecewiseField<f64> {
        let len = b - a;
        PiecewiseField::smooth(a, b, move |t: f64| {
            let u = (t - a) / len;
            let mut v = DVector::zeros(dim);
            let mut dv = DVector::zeros(dim);
            v[axis] = (PI * u).sin();
            dv[axis] = PI / len * (PI * u).cos();
            (v, dv)
        })
    }

    #[test]
    fn flat_sine_field_value() {
        // I(η, η) = ∫₀¹ π² cos²(πs) ds = π²/2 for the flat free line.
        let spec = LagrangianSpec::kinetic(MetricField::<f64>::flat(2));
        let traj = spec
            .integrate_flow(
                &PhaseState::new(ChartPoint::origin(2), DVector::from_row_slice(&[0.2, 0.0])),
                1.0,
                1e-3,
            )
            .unwrap();
        let eta = sine_bump(0.0, 1.0, 0, 2);
        let val = index_form(&spec, &traj, &eta, &eta).unwrap().value;
        assert!((val - PI * PI / 2.0).abs() < 1e-6, "{val}");
    }

    #[test]
    fn jacobi_field_annihilates_reduced_index_form() {
        // Synthetic K = 1 on [0, π]: J = sin(s) e₁ vanishes at both ends and
        // I(J, J) = 0 (boundary formula with Jacobi pieces).
        let eta = PiecewiseField::smooth(0.0, PI, |t: f64| {
            (
                DVector::from_row_slice(&[t.sin(), 0.0]),
                DVector::from_row_slice(&[t.cos(), 0.0]),
            )
        });
        let val = index_form_reduced(
            &|_t: f64| DMatrix::identity(2, 2),
            &eta,
            &eta,
            1e-3,
        )
        .value;
        assert!(val.abs() < 1e-5, "{val}");
    }

    #[test]
    fn index_form_is_symmetric() {
        let spec = LagrangianSpec::new(
            MetricField::flat(2),
            trig_field(2, 0.05, 0, 1, true),
            ClosedOneForm::new(
                DVector::from_row_slice(&[0.2, -0.3]),
                Some(trig_field(2, 0.07, 1, 1, false)),
            ),
            0.0,
        );
        let traj = spec
            .integrate_flow(
                &PhaseState::new(
                    ChartPoint::from_slice(&[0.3, 0.6]),
                    DVector::from_row_slice(&[0.4, 0.1]),
                ),
                1.0,
                1e-3,
            )
            .unwrap();
        let eta = sine_bump(0.0, 1.0, 0, 2);
        let theta = PiecewiseField::smooth(0.0, 1.0, |t: f64| {
            (
                DVector::from_row_slice(&[0.3 * (PI * t).sin(), t * (1.0 - t)]),
                DVector::from_row_slice(&[0.3 * PI * (PI * t).cos(), 1.0 - 2.0 * t]),
            )
        });
        let ab = index_form(&spec, &traj, &eta, &theta).unwrap().value;
        let ba = index_form(&spec, &traj, &theta, &eta).unwrap().value;
        assert!((ab - ba).abs() < 1e-8, "{ab} vs {ba}");
    }

    #[test]
    fn boundary_formula_matches_quadrature_for_jacobi_eta() {
        // Flat free line: η = t·e₁ is a Jacobi field; Lemma-style boundary
        // evaluation must match the integral for any θ.
        let spec = LagrangianSpec::kinetic(MetricField::<f64>::flat(2));
        let traj = spec
            .integrate_flow(
                &PhaseState::new(ChartPoint::origin(2), DVector::from_row_slice(&[0.1, 0.0])),
                1.0,
                1e-3,
            )
            .unwrap();
        let eta = PiecewiseField::smooth(0.0, 1.0, |t: f64| {
            (
                DVector::from_row_slice(&[t, 0.0]),
                DVector::from_row_slice(&[1.0, 0.0]),
            )
        });
        let theta = sine_bump(0.0, 1.0, 0, 2);
        let quad = index_form(&spec, &traj, &eta, &theta).unwrap().value;
        let boundary = index_form_boundary(&spec, &traj, &eta, &theta);
        assert!((quad - boundary).abs() < 1e-7, "{quad} vs {boundary}");
    }

    #[test]
    fn second_variation_matches_index_form() {
        let spec = LagrangianSpec::new(
            MetricField::flat(2),
            trig_field(2, 0.05, 0, 1, true),
            ClosedOneForm::zero(2),
            0.0,
        );
        let traj = spec
            .integrate_flow(
                &PhaseState::new(
                    ChartPoint::from_slice(&[0.2, 0.1]),
                    DVector::from_row_slice(&[0.3, 0.2]),
                ),
                1.0,
                1e-3,
            )
            .unwrap();
        let field = sine_bump(0.0, 1.0, 0, 2);
        let rep = second_variation_check(&spec, &traj, &field).unwrap();
        assert!(rep.rel_error <= 1e-3, "report: {rep:?}");
    }

    #[test]
    fn zero_field_gives_zero() {
        let spec = LagrangianSpec::kinetic(MetricField::<f64>::flat(2));
        let traj = spec
            .integrate_flow(
                &PhaseState::new(ChartPoint::origin(2), DVector::from_row_slice(&[0.2, 0.0])),
                1.0,
                1e-2,
            )
            .unwrap();
        let zero = PiecewiseField::smooth(0.0, 1.0, |_t: f64| {
            (DVector::zeros(2), DVector::zeros(2))
        });
        let rep = second_variation_check(&spec, &traj, &zero).unwrap();
        assert_eq!(rep.index_value, 0.0);
        assert!(rep.fd_value.abs() < 1e-9);
    }

    #[test]
    fn perturbed_flat_line_second_variation_is_dirichlet_energy() {
        // Fixed-endpoint variation of a flat straight line: both routes equal
        // ∫ |V̇|² dt.
        let spec = LagrangianSpec::kinetic(MetricField::<f64>::flat(2));
        let traj = spec
            .integrate_flow(
                &PhaseState::new(ChartPoint::origin(2), DVector::from_row_slice(&[0.4, 0.0])),
                1.0,
                1e-3,
            )
            .unwrap();
        let field = sine_bump(0.0, 1.0, 1, 2);
        let rep = second_variation_check(&spec, &traj, &field).unwrap();
        let dirichlet = PI * PI / 2.0; // ∫ π² cos²(πt) dt
        assert!((rep.index_value - dirichlet).abs() < 1e-6);
        assert!((rep.fd_value - dirichlet).abs() < 1e-3 * dirichlet);
    }

    #[test]
    fn mismatched_interval_is_an_error() {
        let spec = LagrangianSpec::kinetic(MetricField::<f64>::flat(2));
        let traj = spec
            .integrate_flow(
                &PhaseState::new(ChartPoint::origin(2), DVector::from_row_slice(&[0.2, 0.0])),
                1.0,
                1e-2,
            )
            .unwrap();
        let eta = sine_bump(0.0, 2.0, 0, 2);
        let theta = sine_bump(0.0, 1.0, 0, 2);
        assert!(index_form(&spec, &traj, &eta, &theta).is_err());
        let _ = ScalarField::<f64>::zero();
    }
}
