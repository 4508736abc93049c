use nalgebra::{DMatrix, DVector};

use crate::dynamics::{rk4_step, LagrangianSpec, PhaseState, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{ChartPoint, MetricField};
use crate::io::fmt_g17;
use crate::scalar::Real;

/// Orthonormal frame parallel-transported along a trajectory; `vectors[k]`
/// holds the frame vectors as columns at sample `k`.
#[derive(Debug, Clone)]
pub struct ParallelFrame<T: Real> {
    pub times: Vec<T>,
    pub vectors: Vec<DMatrix<T>>,
}

impl<T: Real> ParallelFrame<T> {
    /// Worst deviation of the Gram matrix `g(e_i, e_j)` from the identity.
    pub fn gram_drift(&self, metric: &MetricField<T>, traj: &Trajectory<T>) -> T {
        let n = metric.dim();
        let mut worst = T::zero();
        for (k, (_, s)) in traj.samples().iter().enumerate() {
            let g = metric.at(&s.x);
            let gram = self.vectors[k].transpose() * g * &self.vectors[k];
            worst = worst.max((gram - DMatrix::identity(n, n)).amax());
        }
        worst
    }
}

/// Gram-Schmidt orthonormalization of the chart basis under `g(x)`.
pub(crate) fn orthonormal_frame_at<T: Real>(
    metric: &MetricField<T>,
    x: &ChartPoint<T>,
) -> Result<DMatrix<T>> {
    metric.check_spd(x)?;
    let n = metric.dim();
    let g = metric.at(x);
    let mut cols: Vec<DVector<T>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut v: DVector<T> = DVector::zeros(n);
        v[i] = T::one();
        for u in &cols {
            let proj = (u.transpose() * &g * &v)[0];
            v -= u * proj;
        }
        let norm = (v.transpose() * &g * &v)[0].sqrt();
        cols.push(v / norm);
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Parallel transport of the `g(ρ(0))`-orthonormalized chart basis along the
/// sampled curve: `ė^k = −Γ^k_ij ρ̇^i e^j`, integrated with RK4 against the
/// Hermite interpolant of the trajectory.
pub fn parallel_transport<T: Real>(
    metric: &MetricField<T>,
    traj: &Trajectory<T>,
) -> Result<ParallelFrame<T>> {
    let n = metric.dim();
    let e0 = orthonormal_frame_at(metric, &traj.state_at_index(0).x)?;
    let mut vectors = Vec::with_capacity(traj.len());
    vectors.push(e0.clone());
    let mut flat = DVector::zeros(n * n);
    for (c, col) in e0.column_iter().enumerate() {
        flat.rows_mut(c * n, n).copy_from(&col.into_owned());
    }
    let rhs = |t: T, y: &DVector<T>| {
        let s = traj.interpolate(t);
        let gamma = metric
            .christoffel_at(&s.x)
            .expect("degenerate metric along transport");
        let mut out = DVector::zeros(n * n);
        for c in 0..n {
            let e = y.rows(c * n, n).into_owned();
            let de = -gamma.contract(&s.v, &e);
            out.rows_mut(c * n, n).copy_from(&de);
        }
        out
    };
    let samples = traj.samples();
    for k in 0..samples.len() - 1 {
        let t = samples[k].0;
        let h = samples[k + 1].0 - t;
        flat = rk4_step(&rhs, t, &flat, h);
        let mut m = DMatrix::zeros(n, n);
        for c in 0..n {
            m.column_mut(c).copy_from(&flat.rows(c * n, n));
        }
        vectors.push(m);
    }
    Ok(ParallelFrame {
        times: samples.iter().map(|(t, _)| *t).collect(),
        vectors,
    })
}

/// Jacobi-field frame along a trajectory: the matrix path `A(s)` with
/// `A(0) = 0`, `Ȧ(0) = I` solving `Ä + A·(R(s) + ∇²f(s)) = 0` in the
/// parallel frame, together with the coefficient samples.
#[derive(Debug, Clone)]
pub struct JacobiFrame<T: Real> {
    pub times: Vec<T>,
    pub a: Vec<DMatrix<T>>,
    pub adot: Vec<DMatrix<T>>,
    /// `R(s) + ∇²f(s)` in the parallel frame.
    pub coeff: Vec<DMatrix<T>>,
    /// Parallel frame columns (empty in synthetic propagation).
    pub frame: Vec<DMatrix<T>>,
    /// Base states (empty in synthetic propagation).
    pub states: Vec<PhaseState<T>>,
    pub det_a: Vec<T>,
    /// d(det A)/ds = tr(adj(A)·Ȧ), valid at singular `A` too.
    pub ddet_a: Vec<T>,
}

fn adjugate<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let n = m.nrows();
    if n == 1 {
        return DMatrix::identity(1, 1);
    }
    let mut adj = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let minor = m.clone().remove_row(j).remove_column(i);
            let sign = if (i + j) % 2 == 0 { T::one() } else { -T::one() };
            adj[(i, j)] = sign * minor.determinant();
        }
    }
    adj
}

fn det_derivative<T: Real>(a: &DMatrix<T>, adot: &DMatrix<T>) -> T {
    (adjugate(a) * adot).trace()
}

impl<T: Real> JacobiFrame<T> {
    pub fn dim(&self) -> usize {
        self.a.first().map(|m| m.nrows()).unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push_sample(
        &mut self,
        t: T,
        a: DMatrix<T>,
        adot: DMatrix<T>,
        coeff: DMatrix<T>,
        frame: Option<DMatrix<T>>,
        state: Option<PhaseState<T>>,
    ) {
        self.det_a.push(a.determinant());
        self.ddet_a.push(det_derivative(&a, &adot));
        self.times.push(t);
        self.a.push(a);
        self.adot.push(adot);
        self.coeff.push(coeff);
        if let Some(f) = frame {
            self.frame.push(f);
        }
        if let Some(s) = state {
            self.states.push(s);
        }
    }

    fn empty() -> Self {
        JacobiFrame {
            times: Vec::new(),
            a: Vec::new(),
            adot: Vec::new(),
            coeff: Vec::new(),
            frame: Vec::new(),
            states: Vec::new(),
            det_a: Vec::new(),
            ddet_a: Vec::new(),
        }
    }

    /// CSV dump `s,detA,A11..Ann,Adot11..Adotnn`.
    pub fn to_csv(&self) -> String {
        let n = self.dim();
        let mut out = String::from("s,detA");
        for i in 1..=n {
            for j in 1..=n {
                out.push_str(&format!(",A{i}{j}"));
            }
        }
        for i in 1..=n {
            for j in 1..=n {
                out.push_str(&format!(",Adot{i}{j}"));
            }
        }
        out.push('\n');
        for k in 0..self.len() {
            out.push_str(&fmt_g17(self.times[k].as_f64()));
            out.push(',');
            out.push_str(&fmt_g17(self.det_a[k].as_f64()));
            for m in [&self.a[k], &self.adot[k]] {
                for i in 0..n {
                    for j in 0..n {
                        out.push(',');
                        out.push_str(&fmt_g17(m[(i, j)].as_f64()));
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Coefficient matrix `R(s) + ∇²f(s)` in the frame `e`: entries
/// `g(R(e_i, v)v, e_j) + ∇²f(e_i, e_j)`.
fn frame_coefficient<T: Real>(
    spec: &LagrangianSpec<T>,
    x: &ChartPoint<T>,
    v: &DVector<T>,
    e: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    let n = spec.dim();
    let riemann = spec.metric.riemann_at(x)?;
    let g = spec.metric.at(x);
    let hess = crate::geometry::ops::hessian(&spec.metric, &spec.potential, x)?;
    let mut coeff = DMatrix::zeros(n, n);
    for a in 0..n {
        let ea = e.column(a).into_owned();
        // u^l = R^l_{kij} e_a^i v^j v^k
        let mut u = DVector::zeros(n);
        for l in 0..n {
            let mut s = T::zero();
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        s += riemann.get(l, k, i, j) * ea[i] * v[j] * v[k];
                    }
                }
            }
            u[l] = s;
        }
        let gu = &g * u;
        for b in 0..n {
            let eb = e.column(b).into_owned();
            coeff[(a, b)] = gu.dot(&eb) + (ea.transpose() * &hess * &eb)[0];
        }
    }
    // The coefficient is symmetric up to discretization noise; symmetrize.
    let ct = coeff.transpose();
    Ok((coeff + ct) * T::of(0.5))
}

/// Propagates the Jacobi frame along an extremal of `spec` by re-integrating
/// the coupled system (base point, velocity, parallel frame, `A`, `Ȧ`) with
/// the trajectory's own step. Also records `det A` and its derivative.
pub fn propagate_jacobi_frame<T: Real>(
    spec: &LagrangianSpec<T>,
    traj: &Trajectory<T>,
) -> Result<JacobiFrame<T>> {
    let n = spec.dim();
    let start = traj.state_at_index(0);
    let e0 = orthonormal_frame_at(&spec.metric, &start.x)?;

    // State layout: [x, v, E (n² cols), A (n² rows flattened), Ȧ (n²)].
    let len = 2 * n + 3 * n * n;
    let mut y = DVector::zeros(len);
    y.rows_mut(0, n).copy_from(start.x.coords());
    y.rows_mut(n, n).copy_from(&start.v);
    for c in 0..n {
        y.rows_mut(2 * n + c * n, n).copy_from(&e0.column(c).into_owned());
    }
    // A(0) = 0 already; Ȧ(0) = I.
    for i in 0..n {
        y[2 * n + n * n + n * n + i * n + i] = T::one();
    }

    let unpack = |y: &DVector<T>| -> (ChartPoint<T>, DVector<T>, DMatrix<T>, DMatrix<T>, DMatrix<T>) {
        let x = ChartPoint::new(y.rows(0, n).into_owned());
        let v = y.rows(n, n).into_owned();
        let mut e = DMatrix::zeros(n, n);
        for c in 0..n {
            e.column_mut(c).copy_from(&y.rows(2 * n + c * n, n));
        }
        let mut a = DMatrix::zeros(n, n);
        let mut adot = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = y[2 * n + n * n + i * n + j];
                adot[(i, j)] = y[2 * n + 2 * n * n + i * n + j];
            }
        }
        (x, v, e, a, adot)
    };

    let rhs = |_t: T, y: &DVector<T>| -> DVector<T> {
        let (x, v, e, a, adot) = unpack(y);
        let gamma = spec
            .metric
            .christoffel_at(&x)
            .expect("degenerate metric along frame propagation");
        let acc = spec
            .acceleration(&x, &v)
            .expect("degenerate metric along frame propagation");
        let coeff =
            frame_coefficient(spec, &x, &v, &e).expect("curvature evaluation failed along frame");
        let addot = -(&a * coeff);
        let mut out = DVector::zeros(len);
        out.rows_mut(0, n).copy_from(&v);
        out.rows_mut(n, n).copy_from(&acc);
        for c in 0..n {
            let ec = e.column(c).into_owned();
            let de = -gamma.contract(&v, &ec);
            out.rows_mut(2 * n + c * n, n).copy_from(&de);
        }
        for i in 0..n {
            for j in 0..n {
                out[2 * n + n * n + i * n + j] = adot[(i, j)];
                out[2 * n + 2 * n * n + i * n + j] = addot[(i, j)];
            }
        }
        out
    };

    let mut frame = JacobiFrame::empty();
    let samples = traj.samples();
    {
        let (x, v, e, a, adot) = unpack(&y);
        let coeff = frame_coefficient(spec, &x, &v, &e)?;
        frame.push_sample(samples[0].0, a, adot, coeff, Some(e), Some(PhaseState::new(x, v)));
    }
    for k in 0..samples.len() - 1 {
        let t = samples[k].0;
        let h = samples[k + 1].0 - t;
        y = rk4_step(&rhs, t, &y, h);
        let (x, v, e, a, adot) = unpack(&y);
        if !a.iter().all(|c| c.is_finite()) {
            return Err(Error::Numerical(format!(
                "Jacobi frame blew up; last valid s = {}",
                t.as_f64()
            )));
        }
        let coeff = frame_coefficient(spec, &x, &v, &e)?;
        frame.push_sample(samples[k + 1].0, a, adot, coeff, Some(e), Some(PhaseState::new(x, v)));
    }
    Ok(frame)
}

/// Propagates the frame ODE `Ä + A·C(s) = 0`, `A(0) = 0`, `Ȧ(0) = I` for a
/// synthetic coefficient path `C(s)`; the closed-form test mode.
pub fn propagate_jacobi_frame_synthetic<T: Real>(
    n: usize,
    coeff: impl Fn(T) -> DMatrix<T>,
    t_end: T,
    dt: T,
) -> JacobiFrame<T> {
    let len = 2 * n * n;
    let mut y = DVector::zeros(len);
    for i in 0..n {
        y[n * n + i * n + i] = T::one();
    }
    let unpack = |y: &DVector<T>| -> (DMatrix<T>, DMatrix<T>) {
        let mut a = DMatrix::zeros(n, n);
        let mut adot = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = y[i * n + j];
                adot[(i, j)] = y[n * n + i * n + j];
            }
        }
        (a, adot)
    };
    let rhs = |t: T, y: &DVector<T>| -> DVector<T> {
        let (a, adot) = unpack(y);
        let addot = -(&a * coeff(t));
        let mut out = DVector::zeros(len);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = adot[(i, j)];
                out[n * n + i * n + j] = addot[(i, j)];
            }
        }
        out
    };
    let steps = (t_end / dt).round().as_f64() as usize;
    let h = t_end / T::of(steps as f64);
    let mut frame = JacobiFrame::empty();
    {
        let (a, adot) = unpack(&y);
        frame.push_sample(T::zero(), a, adot, coeff(T::zero()), None, None);
    }
    for k in 0..steps {
        let t = T::of(k as f64) * h;
        y = rk4_step(&rhs, t, &y, h);
        let (a, adot) = unpack(&y);
        frame.push_sample(t + h, a, adot, coeff(t + h), None, None);
    }
    frame
}
