use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::geometry::ChartPoint;
use crate::scalar::Real;

pub type ScalarFn<T> = Arc<dyn Fn(&ChartPoint<T>) -> T + Send + Sync>;
pub type VectorFn<T> = Arc<dyn Fn(&ChartPoint<T>) -> DVector<T> + Send + Sync>;
pub type MatrixFn<T> = Arc<dyn Fn(&ChartPoint<T>) -> DMatrix<T> + Send + Sync>;

pub(crate) const DEFAULT_FD_STEP: f64 = 1e-5;

/// Periodic scalar field on the chart, with optional analytic derivatives.
///
/// When gradient/Hessian closures are absent, central finite differences
/// with step `fd_step` are used.
#[derive(Clone)]
pub struct ScalarField<T: Real> {
    eval: ScalarFn<T>,
    grad: Option<VectorFn<T>>,
    hess: Option<MatrixFn<T>>,
    fd_step: T,
}

impl<T: Real> ScalarField<T> {
    pub fn new(eval: impl Fn(&ChartPoint<T>) -> T + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(eval),
            grad: None,
            hess: None,
            fd_step: T::of(DEFAULT_FD_STEP),
        }
    }

    pub fn with_gradient(
        mut self,
        grad: impl Fn(&ChartPoint<T>) -> DVector<T> + Send + Sync + 'static,
    ) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn with_hessian(
        mut self,
        hess: impl Fn(&ChartPoint<T>) -> DMatrix<T> + Send + Sync + 'static,
    ) -> Self {
        self.hess = Some(Arc::new(hess));
        self
    }

    pub fn with_fd_step(mut self, h: T) -> Self {
        self.fd_step = h;
        self
    }

    pub fn zero() -> Self {
        Self::new(|_| T::zero())
            .with_gradient(|x| DVector::zeros(x.dim()))
            .with_hessian(|x| DMatrix::zeros(x.dim(), x.dim()))
    }

    pub fn constant(c: T) -> Self {
        Self::new(move |_| c)
            .with_gradient(|x| DVector::zeros(x.dim()))
            .with_hessian(|x| DMatrix::zeros(x.dim(), x.dim()))
    }

    #[inline]
    pub fn value(&self, x: &ChartPoint<T>) -> T {
        (self.eval)(x)
    }

    pub fn fd_step(&self) -> T {
        self.fd_step
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.grad.is_some()
    }

    /// Euclidean partial derivatives `(∂_1 f, ..., ∂_n f)` at `x`.
    pub fn gradient(&self, x: &ChartPoint<T>) -> DVector<T> {
        if let Some(g) = &self.grad {
            return g(x);
        }
        let h = self.fd_step;
        DVector::from_fn(x.dim(), |i, _| {
            let mut e = DVector::zeros(x.dim());
            e[i] = h;
            let fp = self.value(&x.translate(&e));
            e[i] = -h;
            let fm = self.value(&x.translate(&e));
            (fp - fm) / (T::of(2.0) * h)
        })
    }

    /// Euclidean second partials `∂_i ∂_j f` at `x` (symmetric).
    pub fn second_partials(&self, x: &ChartPoint<T>) -> DMatrix<T> {
        if let Some(hs) = &self.hess {
            return hs(x);
        }
        let n = x.dim();
        let h = self.fd_step;
        // Differentiate the gradient when analytic, otherwise f directly.
        if self.grad.is_some() {
            let mut m = DMatrix::zeros(n, n);
            for j in 0..n {
                let mut e = DVector::zeros(n);
                e[j] = h;
                let gp = self.gradient(&x.translate(&e));
                e[j] = -h;
                let gm = self.gradient(&x.translate(&e));
                for i in 0..n {
                    m[(i, j)] = (gp[i] - gm[i]) / (T::of(2.0) * h);
                }
            }
            // Symmetrize the FD noise away.
            let mt = m.transpose();
            (m + mt) * T::of(0.5)
        } else {
            let f0 = self.value(x);
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let mut e = DVector::zeros(n);
                    if i == j {
                        e[i] = h;
                        let fp = self.value(&x.translate(&e));
                        e[i] = -h;
                        let fm = self.value(&x.translate(&e));
                        m[(i, i)] = (fp - T::of(2.0) * f0 + fm) / (h * h);
                    } else {
                        let mut val = T::zero();
                        for (si, sj) in [(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
                            e[i] = T::of(si) * h;
                            e[j] = T::of(sj) * h;
                            let f = self.value(&x.translate(&e));
                            val += T::of(si * sj) * f;
                            e[i] = T::zero();
                            e[j] = T::zero();
                        }
                        let v = val / (T::of(4.0) * h * h);
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                }
            }
            m
        }
    }
}

/// A closed 1-form represented as constants plus an exact part:
/// `ω = Σ c_i dx_i + dφ`. Closedness holds by construction and the
/// cohomology class is read off as the constant vector.
#[derive(Clone)]
pub struct ClosedOneForm<T: Real> {
    constants: DVector<T>,
    exact_part: Option<ScalarField<T>>,
}

impl<T: Real> ClosedOneForm<T> {
    pub fn new(constants: DVector<T>, exact_part: Option<ScalarField<T>>) -> Self {
        Self {
            constants,
            exact_part,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            constants: DVector::zeros(dim),
            exact_part: None,
        }
    }

    pub fn constant(constants: DVector<T>) -> Self {
        Self {
            constants,
            exact_part: None,
        }
    }

    pub fn exact(dim: usize, phi: ScalarField<T>) -> Self {
        Self {
            constants: DVector::zeros(dim),
            exact_part: Some(phi),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.constants.len()
    }

    /// Cohomology class `[ω] = (c_1, ..., c_n)`; the exact part contributes zero.
    pub fn cohomology_class(&self) -> DVector<T> {
        self.constants.clone()
    }

    pub fn constants(&self) -> &DVector<T> {
        &self.constants
    }

    pub fn exact_part(&self) -> Option<&ScalarField<T>> {
        self.exact_part.as_ref()
    }

    /// Covector components `ω_k(x) = c_k + ∂_k φ(x)`.
    pub fn at(&self, x: &ChartPoint<T>) -> DVector<T> {
        match &self.exact_part {
            Some(phi) => &self.constants + phi.gradient(x),
            None => self.constants.clone(),
        }
    }

    /// Potential of the exact part at `x` (0 when absent).
    pub fn potential(&self, x: &ChartPoint<T>) -> T {
        self.exact_part
            .as_ref()
            .map(|phi| phi.value(x))
            .unwrap_or_else(T::zero)
    }

    /// Jacobian `J[(k, j)] = ∂_j ω_k(x)`; symmetric because the form is closed.
    pub fn jacobian(&self, x: &ChartPoint<T>) -> DMatrix<T> {
        match &self.exact_part {
            Some(phi) => phi.second_partials(x),
            None => DMatrix::zeros(self.dim(), self.dim()),
        }
    }

    /// Second partials `∂_j ∂_k ω_l(x)` as a matrix per component `l`.
    ///
    /// These are third partials of the exact potential, obtained by central
    /// differencing of its Hessian.
    pub fn second_partials(&self, x: &ChartPoint<T>) -> Vec<DMatrix<T>> {
        let n = self.dim();
        let Some(phi) = &self.exact_part else {
            return vec![DMatrix::zeros(n, n); n];
        };
        let h = T::of(1e-4);
        let mut out = vec![DMatrix::zeros(n, n); n];
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = h;
            let hp = phi.second_partials(&x.translate(&e));
            e[j] = -h;
            let hm = phi.second_partials(&x.translate(&e));
            let d = (hp - hm) / (T::of(2.0) * h);
            // d[(k, l)] = ∂_j ∂_k ∂_l φ
            for l in 0..n {
                for k in 0..n {
                    out[l][(j, k)] = d[(k, l)];
                }
            }
        }
        out
    }

    /// Line integral of `ω` along the oriented straight chart segment given by
    /// the raw displacement `delta` ending at `end`. The constant part pairs
    /// with the unwrapped displacement; the exact part is evaluated at the
    /// (periodic) endpoints.
    pub fn straight_segment_integral(&self, end: &ChartPoint<T>, delta: &DVector<T>) -> T {
        let start = end.translate(&(-delta));
        self.constants.dot(delta) + self.potential(end) - self.potential(&start)
    }
}
