use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::ChartPoint;
use crate::scalar::Real;
use crate::weakkam::grid::ValueFunction;
use crate::weakkam::kernel::{segment_cost, ActionKernel};

/// Discrete backward calibrated curve: positions `ρ(0), ρ(−dt), …`, the
/// per-step calibration defects, and the discrete step velocities.
#[derive(Debug, Clone)]
pub struct CalibratedCurve<T: Real> {
    /// `points[k] ≈ ρ(−k·dt)`, starting on a grid node.
    pub points: Vec<ChartPoint<T>>,
    /// `|u(ρ_k) − u(ρ_{k+1}) − A − c·dt|` per step.
    pub defects: Vec<T>,
    /// `disp(ρ_{k+1} → ρ_k) / dt` per step.
    pub velocities: Vec<DVector<T>>,
}

impl<T: Real> CalibratedCurve<T> {
    pub fn max_defect(&self) -> T {
        self.defects.iter().copied().fold(T::zero(), |a, b| a.max(b))
    }

    /// Mean of the step velocities over the trailing half of the curve.
    pub fn tail_mean_velocity(&self) -> DVector<T> {
        let n = self.velocities.len();
        let tail = (n / 2).max(1);
        let dim = self.velocities[0].len();
        let mut mean = DVector::zeros(dim);
        for v in self.velocities.iter().rev().take(tail) {
            mean += v;
        }
        mean / T::of(tail as f64)
    }
}

/// Backtracks a backward calibrated curve from node `x`:
/// `ρ(−(k+1)·dt) = argmin_y { u(y) + A(y → ρ(−k·dt)) }` over the candidate
/// displacements with interpolated `u` and analytic one-step costs. Ties are
/// broken toward the lexicographically smallest displacement (the candidate
/// enumeration order).
pub fn backward_calibrated_curve<T: Real>(
    kernel: &ActionKernel<T>,
    u: &ValueFunction<T>,
    c: T,
    x: usize,
    steps: usize,
) -> CalibratedCurve<T> {
    let mut points = Vec::with_capacity(steps + 1);
    let mut defects = Vec::with_capacity(steps);
    let mut velocities = Vec::with_capacity(steps);
    let mut cur = kernel.grid.node_point::<T>(x);
    points.push(cur.clone());
    for _ in 0..steps {
        let mut best = T::of(f64::INFINITY);
        let mut best_disp: Option<DVector<T>> = None;
        let mut best_cost = T::zero();
        for cand in &kernel.candidates {
            let foot = cur.translate(&(-&cand.disp));
            let cost = segment_cost(&kernel.spec, kernel.dt, &foot, &cand.disp);
            let val = u.interpolate(&foot) + cost;
            if val < best {
                best = val;
                best_disp = Some(cand.disp.clone());
                best_cost = cost;
            }
        }
        let disp = best_disp.expect("kernel has candidates");
        let foot = cur.translate(&(-&disp));
        let defect =
            (u.interpolate(&cur) - u.interpolate(&foot) - best_cost - c * kernel.dt).abs();
        defects.push(defect);
        velocities.push(&disp / kernel.dt);
        points.push(foot.clone());
        cur = foot;
    }
    CalibratedCurve {
        points,
        defects,
        velocities,
    }
}

/// Domination report over sampled discrete curves.
#[derive(Debug, Clone)]
pub struct DominationReport<T: Real> {
    /// Smallest slack `Σ A + c·t − (u(end) − u(start))` over the sample.
    pub min_slack: T,
    /// Paths whose slack fell below `−2·tol`, as node sequences.
    pub violations: Vec<Vec<usize>>,
}

/// Checks the domination inequality
/// `u(ρ(b)) − u(ρ(a)) ≤ Σ A + c·(b − a)` along the given node paths
/// (consecutive nodes within the stencil radius).
pub fn verify_domination<T: Real>(
    kernel: &ActionKernel<T>,
    u: &ValueFunction<T>,
    c: T,
    paths: &[Vec<usize>],
    tol: T,
) -> DominationReport<T> {
    let mut min_slack = T::of(f64::INFINITY);
    let mut violations = Vec::new();
    for path in paths {
        let mut cost = T::zero();
        for w in path.windows(2) {
            let from = kernel.grid.node_point::<T>(w[0]);
            let to = kernel.grid.node_point::<T>(w[1]);
            let disp = from.displacement_to(&to);
            cost += segment_cost(&kernel.spec, kernel.dt, &from, &disp);
        }
        let t_total = c * kernel.dt * T::of((path.len() - 1) as f64);
        let slack = cost + t_total - (u.values[path[path.len() - 1]] - u.values[path[0]]);
        min_slack = min_slack.min(slack);
        if slack < -T::of(2.0) * tol {
            violations.push(path.clone());
        }
    }
    DominationReport {
        min_slack,
        violations,
    }
}

/// Random stencil-step node path for domination sampling.
pub fn random_stencil_path(
    kernel_grid: &crate::weakkam::grid::Grid,
    r: usize,
    start: usize,
    len: usize,
    seed: u64,
) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut path = Vec::with_capacity(len + 1);
    let mut cur = start;
    path.push(cur);
    for _ in 0..len {
        let off: Vec<i64> = (0..kernel_grid.dim)
            .map(|_| rng.gen_range(-(r as i64)..=r as i64))
            .collect();
        cur = kernel_grid.shift(cur, &off);
        path.push(cur);
    }
    path
}
