use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::fields::{MatrixFn, DEFAULT_FD_STEP};
use crate::geometry::ChartPoint;
use crate::scalar::Real;

/// Derivatives `∂_k g` of the metric tensor, one closure for all directions.
pub type MetricDerivFn<T> = Arc<dyn Fn(&ChartPoint<T>) -> Vec<DMatrix<T>> + Send + Sync>;

/// Christoffel symbols at a point: `symbols[k][(i, j)] = Γ^k_ij`.
#[derive(Debug, Clone)]
pub struct Christoffel<T: Real> {
    pub symbols: Vec<DMatrix<T>>,
}

impl<T: Real> Christoffel<T> {
    /// Contraction `Γ^k_ij u^i w^j` for each `k`.
    pub fn contract(&self, u: &DVector<T>, w: &DVector<T>) -> DVector<T> {
        DVector::from_fn(self.symbols.len(), |k, _| (u.transpose() * &self.symbols[k] * w)[0])
    }
}

/// Riemann curvature components `R^l_{kij}` so that
/// `R(∂_i, ∂_j)∂_k = R^l_{kij} ∂_l`.
#[derive(Debug, Clone)]
pub struct Riemann<T: Real> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Riemann<T> {
    #[inline]
    pub fn get(&self, l: usize, k: usize, i: usize, j: usize) -> T {
        let n = self.n;
        self.data[((l * n + k) * n + i) * n + j]
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// Periodic metric tensor on the chart torus with all derived quantities.
///
/// Metric derivatives come from a user-supplied analytic closure when
/// available, otherwise from central finite differences with step `fd_step`.
#[derive(Clone)]
pub struct MetricField<T: Real> {
    dim: usize,
    tensor: MatrixFn<T>,
    derivs: Option<MetricDerivFn<T>>,
    fd_step: T,
    curvature_step: T,
}

impl<T: Real> MetricField<T> {
    pub fn new(dim: usize, tensor: impl Fn(&ChartPoint<T>) -> DMatrix<T> + Send + Sync + 'static) -> Self {
        Self {
            dim,
            tensor: Arc::new(tensor),
            derivs: None,
            fd_step: T::of(DEFAULT_FD_STEP),
            curvature_step: T::of(1e-4),
        }
    }

    pub fn with_derivatives(
        mut self,
        derivs: impl Fn(&ChartPoint<T>) -> Vec<DMatrix<T>> + Send + Sync + 'static,
    ) -> Self {
        self.derivs = Some(Arc::new(derivs));
        self
    }

    pub fn with_fd_step(mut self, h: T) -> Self {
        self.fd_step = h;
        self
    }

    /// Flat metric `g = I`.
    pub fn flat(dim: usize) -> Self {
        Self::new(dim, move |_| DMatrix::identity(dim, dim))
            .with_derivatives(move |_| vec![DMatrix::zeros(dim, dim); dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fd_step(&self) -> T {
        self.fd_step
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.derivs.is_some()
    }

    /// Drops the analytic derivative closure, forcing finite differences.
    pub fn without_analytic_derivatives(mut self) -> Self {
        self.derivs = None;
        self
    }

    #[inline]
    pub fn at(&self, x: &ChartPoint<T>) -> DMatrix<T> {
        (self.tensor)(x)
    }

    pub fn det_at(&self, x: &ChartPoint<T>) -> T {
        self.at(x).determinant()
    }

    pub fn sqrt_det_at(&self, x: &ChartPoint<T>) -> T {
        self.det_at(x).sqrt()
    }

    pub fn inverse_at(&self, x: &ChartPoint<T>) -> Result<DMatrix<T>> {
        self.check_spd(x)?;
        self.at(x)
            .try_inverse()
            .ok_or_else(|| Error::Numerical(format!("metric not invertible at {x}")))
    }

    /// Fails with a degenerate-metric error unless `g(x)` is symmetric
    /// positive definite.
    pub fn check_spd(&self, x: &ChartPoint<T>) -> Result<()> {
        let g = self.at(x);
        let min_eig = g
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(T::of(f64::INFINITY), |a, b| a.min(b));
        if min_eig <= T::zero() {
            return Err(Error::DegenerateMetric {
                point: x.to_string(),
                min_eigenvalue: min_eig.as_f64(),
            });
        }
        Ok(())
    }

    /// Inner product `g_x(u, w)`.
    pub fn inner(&self, x: &ChartPoint<T>, u: &DVector<T>, w: &DVector<T>) -> T {
        (u.transpose() * self.at(x) * w)[0]
    }

    pub fn norm(&self, x: &ChartPoint<T>, u: &DVector<T>) -> T {
        self.inner(x, u, u).sqrt()
    }

    /// Musical isomorphism ♯: covector to vector via `g^{ij}`.
    pub fn sharp(&self, x: &ChartPoint<T>, covector: &DVector<T>) -> Result<DVector<T>> {
        Ok(self.inverse_at(x)? * covector)
    }

    /// Musical isomorphism ♭: vector to covector via `g_ij`.
    pub fn flat_map(&self, x: &ChartPoint<T>, vector: &DVector<T>) -> DVector<T> {
        self.at(x) * vector
    }

    /// Partial derivatives `∂_k g` at `x`.
    pub fn partials_at(&self, x: &ChartPoint<T>) -> Vec<DMatrix<T>> {
        if let Some(d) = &self.derivs {
            return d(x);
        }
        let h = self.fd_step;
        let n = self.dim;
        (0..n)
            .map(|k| {
                let mut e = DVector::zeros(n);
                e[k] = h;
                let gp = self.at(&x.translate(&e));
                e[k] = -h;
                let gm = self.at(&x.translate(&e));
                (gp - gm) / (T::of(2.0) * h)
            })
            .collect()
    }

    /// Second partials `∂_j ∂_k g` at `x`, obtained by central differencing
    /// of the first partials and symmetrized in `(j, k)`.
    pub fn second_partials_at(&self, x: &ChartPoint<T>) -> Vec<Vec<DMatrix<T>>> {
        let n = self.dim;
        let h = self.curvature_step;
        let two = T::of(2.0);
        let mut raw: Vec<Vec<DMatrix<T>>> = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = h;
            let dp = self.partials_at(&x.translate(&e));
            e[j] = -h;
            let dm = self.partials_at(&x.translate(&e));
            raw.push(
                dp.into_iter()
                    .zip(dm)
                    .map(|(p, q)| (p - q) / (two * h))
                    .collect(),
            );
        }
        let mut out = vec![vec![DMatrix::zeros(n, n); n]; n];
        for j in 0..n {
            for k in 0..n {
                out[j][k] = (&raw[j][k] + &raw[k][j]) * T::of(0.5);
            }
        }
        out
    }

    /// Christoffel symbols `Γ^k_ij = ½ g^{km}(∂_i g_mj + ∂_j g_mi − ∂_m g_ij)`.
    pub fn christoffel_at(&self, x: &ChartPoint<T>) -> Result<Christoffel<T>> {
        let n = self.dim;
        let ginv = self.inverse_at(x)?;
        let dg = self.partials_at(x);
        let half = T::of(0.5);
        let mut symbols = Vec::with_capacity(n);
        for k in 0..n {
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let mut s = T::zero();
                    for l in 0..n {
                        s += ginv[(k, l)] * (dg[i][(l, j)] + dg[j][(l, i)] - dg[l][(i, j)]);
                    }
                    let v = half * s;
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            symbols.push(m);
        }
        Ok(Christoffel { symbols })
    }

    /// Riemann tensor from Christoffel symbols and their central differences:
    /// `R^l_{kij} = ∂_i Γ^l_jk − ∂_j Γ^l_ik + Γ^l_im Γ^m_jk − Γ^l_jm Γ^m_ik`.
    pub fn riemann_at(&self, x: &ChartPoint<T>) -> Result<Riemann<T>> {
        let n = self.dim;
        let h = self.curvature_step;
        let gamma = self.christoffel_at(x)?;
        // dgamma[m] = ∂_m Γ, each as symbols[k][(i, j)]
        let mut dgamma = Vec::with_capacity(n);
        for m in 0..n {
            let mut e = DVector::zeros(n);
            e[m] = h;
            let gp = self.christoffel_at(&x.translate(&e))?;
            e[m] = -h;
            let gm = self.christoffel_at(&x.translate(&e))?;
            let d: Vec<DMatrix<T>> = gp
                .symbols
                .into_iter()
                .zip(gm.symbols)
                .map(|(p, q)| (p - q) / (T::of(2.0) * h))
                .collect();
            dgamma.push(d);
        }
        let mut data = vec![T::zero(); n * n * n * n];
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut v = dgamma[i][l][(j, k)] - dgamma[j][l][(i, k)];
                        for m in 0..n {
                            v += gamma.symbols[l][(i, m)] * gamma.symbols[m][(j, k)]
                                - gamma.symbols[l][(j, m)] * gamma.symbols[m][(i, k)];
                        }
                        data[((l * n + k) * n + i) * n + j] = v;
                    }
                }
            }
        }
        Ok(Riemann { n, data })
    }

    /// Ricci tensor `Ric_{kj} = R^i_{kij}`.
    pub fn ricci_tensor_at(&self, x: &ChartPoint<T>) -> Result<DMatrix<T>> {
        let n = self.dim;
        let r = self.riemann_at(x)?;
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            for j in 0..n {
                let mut s = T::zero();
                for i in 0..n {
                    s += r.get(i, k, i, j);
                }
                m[(k, j)] = s;
            }
        }
        Ok(m)
    }

    /// Ricci curvature `Ric(v) = tr(w ↦ R(w, v)v)`, quadratic in `v`.
    pub fn ricci_at(&self, x: &ChartPoint<T>, v: &DVector<T>) -> Result<T> {
        if self.curvature_step <= T::zero() {
            return Err(Error::Config("curvature derivative step underflow".into()));
        }
        let ric = self.ricci_tensor_at(x)?;
        Ok((v.transpose() * ric * v)[0])
    }
}
