use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::fmt_g17;
use crate::scalar::Real;
use crate::weakkam::ActionKernel;

use super::peierls::{peierls_barrier, BarrierSlice};

/// Projected Aubry set detection: nodes whose diagonal barrier value
/// `h(x, x)` stays within `tol_a`. Errors when the set comes out empty (it
/// never is on a compact manifold).
pub fn aubry_set<T: Real>(diagonal: &[(usize, T)], tol_a: T) -> Result<Vec<usize>> {
    let nodes: Vec<usize> = diagonal
        .iter()
        .filter(|(_, h)| *h <= tol_a)
        .map(|(x, _)| *x)
        .collect();
    if nodes.is_empty() {
        return Err(Error::Numerical(
            "empty Aubry set: tolerance too tight or horizons too short".into(),
        ));
    }
    Ok(nodes)
}

/// Mather quotient over a subsampled Aubry set.
#[derive(Debug, Clone)]
pub struct MatherQuotientReport<T: Real> {
    /// Base nodes the pairwise barrier was computed on.
    pub base_nodes: Vec<usize>,
    /// Dense symmetric `δ(x_i, x_j) = h(x_i, x_j) + h(x_j, x_i)`.
    pub delta: Vec<T>,
    pub component_count: usize,
    /// Sensitivity companion: components at `2·tol_q`.
    pub component_count_2tol: usize,
    pub representatives: Vec<usize>,
    pub tol_a: T,
    pub tol_q: T,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }
    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }
    fn union(&mut self, i: usize, j: usize) {
        let (ri, rj) = (self.find(i), self.find(j));
        if ri != rj {
            self.parent[ri.max(rj)] = ri.min(rj);
        }
    }
}

fn components<T: Real>(delta: &[T], n: usize, tol: T) -> (usize, Vec<usize>) {
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if delta[i * n + j] <= tol {
                uf.union(i, j);
            }
        }
    }
    let mut reps = Vec::new();
    for i in 0..n {
        if uf.find(i) == i {
            reps.push(i);
        }
    }
    (reps.len(), reps)
}

/// Assembles the Mather pseudo-metric over at most `max_bases` of the given
/// Aubry nodes (evenly subsampled), computing one barrier slice per base,
/// and reports the `δ ≤ tol_q` component structure together with the
/// `2·tol_q` sensitivity count.
#[allow(clippy::too_many_arguments)]
pub fn mather_quotient<T: Real>(
    kernel: &ActionKernel<T>,
    c: T,
    aubry_nodes: &[usize],
    horizons: &[usize],
    stability_tol: T,
    tol_a: T,
    tol_q: T,
    max_bases: usize,
) -> Result<MatherQuotientReport<T>> {
    if aubry_nodes.is_empty() {
        return Err(Error::InvalidArgument("no Aubry nodes supplied".into()));
    }
    let stride = aubry_nodes.len().div_ceil(max_bases).max(1);
    let base_nodes: Vec<usize> = aubry_nodes.iter().copied().step_by(stride).collect();
    let slices: Vec<BarrierSlice<T>> = base_nodes
        .par_iter()
        .map(|&b| peierls_barrier(kernel, c, b, horizons, stability_tol))
        .collect();
    let n = base_nodes.len();
    let mut delta = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            // δ is symmetric by construction.
            let v = slices[i].h.values[base_nodes[j]] + slices[j].h.values[base_nodes[i]];
            delta[i * n + j] = v;
        }
    }
    let (component_count, rep_idx) = components(&delta, n, tol_q);
    let (component_count_2tol, _) = components(&delta, n, T::of(2.0) * tol_q);
    let representatives = rep_idx.into_iter().map(|i| base_nodes[i]).collect();
    Ok(MatherQuotientReport {
        base_nodes,
        delta,
        component_count,
        component_count_2tol,
        representatives,
        tol_a,
        tol_q,
    })
}

impl<T: Real> MatherQuotientReport<T> {
    /// JSON summary `{aubry_count, component_count, tol_A, tol_Q,
    /// representatives}`.
    pub fn to_json(&self, aubry_count: usize) -> serde_json::Value {
        serde_json::json!({
            "aubry_count": aubry_count,
            "component_count": self.component_count,
            "component_count_2tolQ": self.component_count_2tol,
            "tol_A": self.tol_a.as_f64(),
            "tol_Q": self.tol_q.as_f64(),
            "representatives": self.representatives,
        })
    }

    /// CSV dump `ix,iy,h`-style for the pairwise δ matrix.
    pub fn delta_csv(&self) -> String {
        let n = self.base_nodes.len();
        let mut out = String::from("ix,iy,delta\n");
        for i in 0..n {
            for j in 0..n {
                out.push_str(&format!(
                    "{},{},{}\n",
                    self.base_nodes[i],
                    self.base_nodes[j],
                    fmt_g17(self.delta[i * n + j].as_f64())
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::trig_field;
    use crate::dynamics::LagrangianSpec;
    use crate::geometry::{ClosedOneForm, MetricField, ScalarField};
    use crate::weakkam::{build_kernel, estimate_critical_value, Grid};

    #[test]
    fn aubry_set_empty_is_error() {
        assert!(aubry_set::<f64>(&[(0, 1.0), (1, 0.5)], 1e-3).is_err());
    }

    #[test]
    fn harmonic_quotient_is_singleton() {
        let spec = LagrangianSpec::<f64>::new(
            MetricField::flat(2),
            ScalarField::zero(),
            ClosedOneForm::constant(nalgebra::DVector::from_row_slice(&[0.3, 0.4])),
            0.0,
        );
        let grid = Grid::new(2, 32);
        let kernel = build_kernel(&spec, &grid, 0.05, 3, 2).unwrap();
        let (est, _) = estimate_critical_value(&kernel, 1e-9, 2000, None);
        let horizons = super::super::peierls::horizon_steps(&kernel, &[5.0, 10.0, 20.0]);
        // Translation invariance makes the diagonal constant; sample a few
        // bases for the Aubry decision.
        let bases: Vec<usize> = (0..4).map(|k| grid.ravel(&[k * 8, k * 5])).collect();
        let diag: Vec<(usize, f64)> = bases
            .iter()
            .map(|&b| {
                let s = peierls_barrier(&kernel, est.c, b, &horizons, 1e-4);
                (b, s.h.values[b])
            })
            .collect();
        let aubry = aubry_set(&diag, 5e-3 + 2e-2).unwrap();
        assert_eq!(aubry.len(), bases.len(), "diag: {diag:?}");
        let report = mather_quotient(
            &kernel, est.c, &aubry, &horizons, 1e-4, 5e-3, 5e-2, 16,
        )
        .unwrap();
        assert_eq!(report.component_count, 1, "delta: {:?}", report.delta);
        // δ nonnegative up to scheme tolerance and symmetric by construction.
        let n = report.base_nodes.len();
        for i in 0..n {
            for j in 0..n {
                assert!(report.delta[i * n + j] >= -2e-6);
                assert_eq!(report.delta[i * n + j], report.delta[j * n + i]);
            }
        }
    }

    #[test]
    fn two_well_quotient_matches_1d_barrier_oracle() {
        // Two ridges x₁ ∈ {0, ½} with equal maxima: the 1D Mañé barrier
        // between them is ∫√(2(max f − f)) ≈ 2√ε/π per direction, so the
        // quotient splits into two components at tol_Q below 4√ε/π.
        let eps = 0.05;
        let spec = LagrangianSpec::<f64>::new(
            MetricField::flat(2),
            trig_field(2, eps, 0, 2, true),
            ClosedOneForm::zero(2),
            0.0,
        );
        let grid = Grid::new(2, 64);
        let kernel = build_kernel(&spec, &grid, 0.05, 3, 4).unwrap();
        let (est, _) = estimate_critical_value(&kernel, 1e-9, 3000, None);
        assert!((est.c - eps).abs() <= 5e-3);
        let horizons = super::super::peierls::horizon_steps(&kernel, &[5.0, 10.0, 20.0]);
        let bases = [
            grid.ravel(&[0, 6]),
            grid.ravel(&[0, 38]),
            grid.ravel(&[32, 18]),
            grid.ravel(&[32, 54]),
        ];
        let diag: Vec<(usize, f64)> = bases
            .iter()
            .map(|&b| {
                let s = peierls_barrier(&kernel, est.c, b, &horizons, 1e-3);
                (b, s.h.values[b])
            })
            .collect();
        let aubry = aubry_set(&diag, 5e-3 + 2e-2).unwrap();
        assert_eq!(aubry.len(), 4);
        // Oracle barrier value between the wells.
        let oracle = 4.0 * eps.sqrt() / std::f64::consts::PI;
        let tol_q = 0.5 * oracle; // decision threshold below the gap
        let report = mather_quotient(
            &kernel, est.c, &aubry, &horizons, 1e-3, 5e-3, tol_q, 16,
        )
        .unwrap();
        let expected_components = if oracle > tol_q { 2 } else { 1 };
        assert_eq!(report.component_count, expected_components);
        // Cross-ridge δ close to the quadrature oracle.
        let n = report.base_nodes.len();
        let mut cross = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                let xi = grid.unravel(report.base_nodes[i])[0];
                let xj = grid.unravel(report.base_nodes[j])[0];
                if xi != xj {
                    cross = cross.min(report.delta[i * n + j]);
                }
            }
        }
        assert!(
            (cross - oracle).abs() <= 0.1 * oracle,
            "cross-ridge δ = {cross}, oracle = {oracle}"
        );
    }
}
