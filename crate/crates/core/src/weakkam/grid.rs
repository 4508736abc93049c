use nalgebra::DVector;

use crate::geometry::ChartPoint;
use crate::io::fmt_g17;
use crate::scalar::Real;

/// Uniform periodic grid on the chart torus: `n` nodes per axis, spacing
/// `1/n`, row-major flat indexing with axis 0 slowest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    pub dim: usize,
    pub n: usize,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Self {
        assert!(dim >= 1 && n >= 2);
        Self { dim, n }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing<T: Real>(&self) -> T {
        T::one() / T::of(self.n as f64)
    }

    pub fn unravel(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        let mut rest = flat;
        for a in (0..self.dim).rev() {
            idx[a] = rest % self.n;
            rest /= self.n;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for a in 0..self.dim {
            flat = flat * self.n + idx[a];
        }
        flat
    }

    #[inline]
    pub fn wrap_axis(&self, i: i64) -> usize {
        i.rem_euclid(self.n as i64) as usize
    }

    pub fn ravel_wrapped(&self, idx: &[i64]) -> usize {
        let mut flat = 0;
        for a in 0..self.dim {
            flat = flat * self.n + self.wrap_axis(idx[a]);
        }
        flat
    }

    /// Flat index of `flat` shifted by `offset` grid cells (periodic).
    pub fn shift(&self, flat: usize, offset: &[i64]) -> usize {
        let idx = self.unravel(flat);
        let shifted: Vec<i64> = (0..self.dim)
            .map(|a| idx[a] as i64 + offset[a])
            .collect();
        self.ravel_wrapped(&shifted)
    }

    pub fn node_point<T: Real>(&self, flat: usize) -> ChartPoint<T> {
        let idx = self.unravel(flat);
        let h = self.spacing::<T>();
        ChartPoint::new(DVector::from_fn(self.dim, |a, _| T::of(idx[a] as f64) * h))
    }

    pub fn nearest_node<T: Real>(&self, x: &ChartPoint<T>) -> usize {
        let idx: Vec<i64> = (0..self.dim)
            .map(|a| {
                (x.coord(a) * T::of(self.n as f64))
                    .round()
                    .as_f64() as i64
            })
            .collect();
        self.ravel_wrapped(&idx)
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> {
        0..self.len()
    }
}

/// Grid-sampled scalar field (value functions, barrier slices, potentials).
#[derive(Debug, Clone)]
pub struct ValueFunction<T: Real> {
    pub grid: Grid,
    pub values: Vec<T>,
}

impl<T: Real> ValueFunction<T> {
    pub fn zeros(grid: Grid) -> Self {
        let len = grid.len();
        Self {
            grid,
            values: vec![T::zero(); len],
        }
    }

    pub fn constant(grid: Grid, c: T) -> Self {
        let len = grid.len();
        Self {
            grid,
            values: vec![c; len],
        }
    }

    pub fn min(&self) -> T {
        self.values
            .iter()
            .copied()
            .fold(T::of(f64::INFINITY), |a, b| a.min(b))
    }

    pub fn max(&self) -> T {
        self.values
            .iter()
            .copied()
            .fold(T::of(f64::NEG_INFINITY), |a, b| a.max(b))
    }

    pub fn sup_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()))
    }

    /// Shifts values so the anchor node 0 sits at zero.
    pub fn anchor_normalized(&self) -> Self {
        let v0 = self.values[0];
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| *v - v0).collect(),
        }
    }

    /// Periodic multilinear interpolation at a chart point.
    pub fn interpolate(&self, x: &ChartPoint<T>) -> T {
        let d = self.grid.dim;
        let nf = T::of(self.grid.n as f64);
        let mut base = vec![0i64; d];
        let mut frac = vec![T::zero(); d];
        for a in 0..d {
            let u = x.coord(a) * nf;
            let fl = u.floor();
            base[a] = fl.as_f64() as i64;
            frac[a] = u - fl;
        }
        let mut acc = T::zero();
        for corner in 0..(1usize << d) {
            let mut w = T::one();
            let mut idx = vec![0i64; d];
            for a in 0..d {
                if corner >> a & 1 == 1 {
                    w *= frac[a];
                    idx[a] = base[a] + 1;
                } else {
                    w *= T::one() - frac[a];
                    idx[a] = base[a];
                }
            }
            if w != T::zero() {
                acc += w * self.values[self.grid.ravel_wrapped(&idx)];
            }
        }
        acc
    }

    /// Largest slope `|u(x) − u(y)| / Δx` over nearest-neighbor pairs.
    pub fn max_neighbor_slope(&self) -> T {
        let h = self.grid.spacing::<T>();
        let mut worst = T::zero();
        for flat in self.grid.nodes() {
            for a in 0..self.grid.dim {
                let mut off = vec![0i64; self.grid.dim];
                off[a] = 1;
                let nb = self.grid.shift(flat, &off);
                worst = worst.max((self.values[flat] - self.values[nb]).abs() / h);
            }
        }
        worst
    }

    /// CSV dump `i1..in,x1..xn,u`.
    pub fn to_csv(&self) -> String {
        let d = self.grid.dim;
        let mut out = String::new();
        for a in 1..=d {
            out.push_str(&format!("i{a},"));
        }
        for a in 1..=d {
            out.push_str(&format!("x{a},"));
        }
        out.push_str("u\n");
        for flat in self.grid.nodes() {
            let idx = self.grid.unravel(flat);
            let p = self.grid.node_point::<T>(flat);
            for a in 0..d {
                out.push_str(&format!("{},", idx[a]));
            }
            for a in 0..d {
                out.push_str(&fmt_g17(p.coord(a).as_f64()));
                out.push(',');
            }
            out.push_str(&fmt_g17(self.values[flat].as_f64()));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ravel_roundtrip() {
        let g = Grid::new(2, 8);
        for flat in g.nodes() {
            assert_eq!(g.ravel(&g.unravel(flat)), flat);
        }
    }

    #[test]
    fn shift_wraps() {
        let g = Grid::new(2, 8);
        let flat = g.ravel(&[7, 0]);
        assert_eq!(g.shift(flat, &[1, -1]), g.ravel(&[0, 7]));
    }

    #[test]
    fn interpolation_is_exact_on_nodes_and_linear_between() {
        let g = Grid::new(2, 8);
        let mut u = ValueFunction::zeros(g.clone());
        for flat in g.nodes() {
            let idx = g.unravel(flat);
            u.values[flat] = idx[0] as f64; // linear ramp, mind the wrap
        }
        let exact = u.interpolate(&ChartPoint::from_slice(&[3.0 / 8.0, 0.1]));
        assert!((exact - 3.0).abs() < 1e-14);
        let mid = u.interpolate(&ChartPoint::from_slice(&[3.5 / 8.0, 0.7]));
        assert!((mid - 3.5).abs() < 1e-14);
    }

    #[test]
    fn nearest_node_rounds() {
        let g = Grid::new(2, 8);
        let x = ChartPoint::from_slice(&[0.13f64, 0.99]);
        let flat = g.nearest_node(&x);
        assert_eq!(g.unravel(flat), vec![1, 0]);
    }
}
