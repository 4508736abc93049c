use nalgebra::DVector;

use crate::dynamics::integrate::rk4_step;
use crate::dynamics::trajectory::Trajectory;
use crate::error::{Error, Result};
use crate::geometry::{ChartPoint, ClosedOneForm, MetricField, ScalarField};
use crate::scalar::Real;

/// A point of the tangent bundle in chart coordinates.
#[derive(Debug, Clone)]
pub struct PhaseState<T: Real> {
    pub x: ChartPoint<T>,
    pub v: DVector<T>,
}

impl<T: Real> PhaseState<T> {
    pub fn new(x: ChartPoint<T>, v: DVector<T>) -> Self {
        Self { x, v }
    }
}

/// A point of the cotangent bundle in chart coordinates.
#[derive(Debug, Clone)]
pub struct CotangentState<T: Real> {
    pub x: ChartPoint<T>,
    pub p: DVector<T>,
}

/// The tuple `(g, f, ω, c)` defining `L(x, v) = ½g_x(v, v) − f(x) − ω_x(v) + c`
/// and its Tonelli Hamiltonian `H(x, p) = ½g*_x(p + ω, p + ω) + f(x) − c`.
#[derive(Clone)]
pub struct LagrangianSpec<T: Real> {
    pub metric: MetricField<T>,
    pub potential: ScalarField<T>,
    pub form: ClosedOneForm<T>,
    pub c: T,
    /// Trajectories whose chart speed exceeds this cap abort integration.
    pub v_max: T,
}

pub(crate) const DEFAULT_V_MAX: f64 = 10.0;

impl<T: Real> LagrangianSpec<T> {
    pub fn new(
        metric: MetricField<T>,
        potential: ScalarField<T>,
        form: ClosedOneForm<T>,
        c: T,
    ) -> Self {
        Self {
            metric,
            potential,
            form,
            c,
            v_max: T::of(DEFAULT_V_MAX),
        }
    }

    /// Purely kinetic Lagrangian `½g(v, v)`.
    pub fn kinetic(metric: MetricField<T>) -> Self {
        let dim = metric.dim();
        Self::new(metric, ScalarField::zero(), ClosedOneForm::zero(dim), T::zero())
    }

    /// Mañé Lagrangian `½g(v − X, v − X)` with `X = ω♯`, stored in expanded
    /// form: the metric-potential-form family with `f = −½g(X, X)`, the same
    /// `ω`, and `c = 0`.
    pub fn mane(metric: MetricField<T>, form: ClosedOneForm<T>) -> Self {
        let m = metric.clone();
        let om = form.clone();
        let f = ScalarField::new(move |x: &ChartPoint<T>| {
            let p = om.at(x);
            let xv = m.sharp(x, &p).expect("degenerate metric in Mañé potential");
            -T::of(0.5) * m.inner(x, &xv, &xv)
        });
        Self::new(metric, f, form, T::zero())
    }

    pub fn with_v_max(mut self, v_max: T) -> Self {
        self.v_max = v_max;
        self
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// Reverse Lagrangian `L̆(x, v) = L(x, −v)`, i.e. `ω ↦ −ω`.
    pub fn reversed(&self) -> Self {
        let constants = -self.form.constants();
        let phi = self.form.exact_part().map(|f| {
            let f = f.clone();
            ScalarField::new(move |x: &ChartPoint<T>| -f.value(x))
        });
        Self {
            metric: self.metric.clone(),
            potential: self.potential.clone(),
            form: ClosedOneForm::new(constants, phi),
            c: self.c,
            v_max: self.v_max,
        }
    }

    /// `L(x, v) = ½g(v, v) − f(x) − ω(v) + c`.
    pub fn lagrangian(&self, x: &ChartPoint<T>, v: &DVector<T>) -> T {
        T::of(0.5) * self.metric.inner(x, v, v) - self.potential.value(x)
            - self.form.at(x).dot(v)
            + self.c
    }

    /// Legendre transform: `p_k = g_ki v^i − ω_k`.
    pub fn legendre(&self, state: &PhaseState<T>) -> CotangentState<T> {
        let p = self.metric.flat_map(&state.x, &state.v) - self.form.at(&state.x);
        CotangentState { x: state.x.clone(), p }
    }

    /// Inverse Legendre transform: `v = g^{-1}(p + ω)`.
    pub fn inverse_legendre(&self, cot: &CotangentState<T>) -> Result<PhaseState<T>> {
        let v = self.metric.sharp(&cot.x, &(&cot.p + self.form.at(&cot.x)))?;
        Ok(PhaseState { x: cot.x.clone(), v })
    }

    /// Tonelli Hamiltonian `H(x, p) = ½g*(p + ω, p + ω) + f(x) − c`.
    pub fn hamiltonian(&self, cot: &CotangentState<T>) -> Result<T> {
        let q = &cot.p + self.form.at(&cot.x);
        let sharp = self.metric.sharp(&cot.x, &q)?;
        Ok(T::of(0.5) * q.dot(&sharp) + self.potential.value(&cot.x) - self.c)
    }

    /// Energy `H ∘ 𝓛 = ½g(v, v) + f(x) − c`, conserved along the flow.
    pub fn energy(&self, state: &PhaseState<T>) -> T {
        T::of(0.5) * self.metric.inner(&state.x, &state.v, &state.v)
            + self.potential.value(&state.x)
            - self.c
    }

    /// Euler-Lagrange acceleration `a^k = −Γ^k_ij v^i v^j − g^{km} ∂_m f`.
    /// The closed form ω does not enter.
    pub fn acceleration(&self, x: &ChartPoint<T>, v: &DVector<T>) -> Result<DVector<T>> {
        let gamma = self.metric.christoffel_at(x)?;
        let grad_f = self.metric.sharp(x, &self.potential.gradient(x))?;
        Ok(-gamma.contract(v, v) - grad_f)
    }

    fn flat_rhs(&self, y: &DVector<T>) -> DVector<T> {
        let n = self.dim();
        let x = ChartPoint::new(y.rows(0, n).into_owned());
        let v = y.rows(n, n).into_owned();
        let a = self
            .acceleration(&x, &v)
            .expect("degenerate metric along Euler-Lagrange flow");
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&v);
        out.rows_mut(n, n).copy_from(&a);
        out
    }

    /// One RK4 step of the Euler-Lagrange flow; `dt` may be negative.
    pub fn el_step(&self, state: &PhaseState<T>, dt: T) -> Result<PhaseState<T>> {
        let n = self.dim();
        let mut y = DVector::zeros(2 * n);
        y.rows_mut(0, n).copy_from(state.x.coords());
        y.rows_mut(n, n).copy_from(&state.v);
        let f = |_t: T, y: &DVector<T>| self.flat_rhs(y);
        let y1 = rk4_step(&f, T::zero(), &y, dt);
        let x = ChartPoint::new(y1.rows(0, n).into_owned());
        let v = y1.rows(n, n).into_owned();
        let speed = v.norm();
        if speed > self.v_max {
            return Err(Error::VelocityCap {
                t: dt.as_f64(),
                speed: speed.as_f64(),
                cap: self.v_max.as_f64(),
            });
        }
        Ok(PhaseState { x, v })
    }

    /// Integrates the Euler-Lagrange flow over `[0, t_total]` (or
    /// `[t_total, 0]` when `t_total < 0`) with step `dt > 0`. Samples are
    /// returned with strictly increasing time.
    pub fn integrate_flow(
        &self,
        state: &PhaseState<T>,
        t_total: T,
        dt: T,
    ) -> Result<Trajectory<T>> {
        if dt <= T::zero() {
            return Err(Error::InvalidArgument("dt must be positive".into()));
        }
        let steps = (t_total.abs() / dt).round().as_f64() as usize;
        let backward = t_total < T::zero();
        let h = if backward { -dt } else { dt };
        let mut samples = Vec::with_capacity(steps + 1);
        let mut cur = state.clone();
        samples.push((T::zero(), cur.clone()));
        for k in 0..steps {
            cur = self.el_step(&cur, h).map_err(|e| match e {
                Error::VelocityCap { speed, cap, .. } => Error::VelocityCap {
                    t: (T::of(k as f64 + 1.0) * h).as_f64(),
                    speed,
                    cap,
                },
                other => other,
            })?;
            samples.push((T::of(k as f64 + 1.0) * h, cur.clone()));
        }
        if backward {
            samples.reverse();
        }
        Ok(Trajectory::new(samples, dt))
    }

    /// Action `∫ L(ρ, ρ̇) ds` along a sampled trajectory.
    ///
    /// The kinetic, potential and constant terms are integrated by composite
    /// Simpson quadrature (trapezoid on a trailing odd interval); the ω term
    /// is the exact line integral along the unwrapped lift.
    pub fn action(&self, traj: &Trajectory<T>) -> T {
        let samples = traj.samples();
        assert!(!samples.is_empty(), "action of an empty trajectory");
        if samples.len() == 1 {
            return T::zero();
        }
        let w = |s: &PhaseState<T>| {
            T::of(0.5) * self.metric.inner(&s.x, &s.v, &s.v) - self.potential.value(&s.x) + self.c
        };
        let vals: Vec<T> = samples.iter().map(|(_, s)| w(s)).collect();
        let h = samples[1].0 - samples[0].0;
        let mut acc = T::zero();
        let m = vals.len() - 1; // number of intervals
        let simpson_pairs = m / 2;
        for k in 0..simpson_pairs {
            let i = 2 * k;
            acc += (vals[i] + T::of(4.0) * vals[i + 1] + vals[i + 2]) * h / T::of(3.0);
        }
        if m % 2 == 1 {
            acc += (vals[m - 1] + vals[m]) * h * T::of(0.5);
        }
        // ω line integral over the unwrapped lift: Σ c_i Δx_i + φ(end) − φ(start).
        let mut lift = DVector::zeros(self.dim());
        for pair in samples.windows(2) {
            lift += pair[0].1.x.displacement_to(&pair[1].1.x);
        }
        let omega_int = self.form.constants().dot(&lift)
            + self.form.potential(&samples[samples.len() - 1].1.x)
            - self.form.potential(&samples[0].1.x);
        acc - omega_int
    }
}
