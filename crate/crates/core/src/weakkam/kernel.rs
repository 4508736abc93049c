use nalgebra::DVector;
use rayon::prelude::*;

use crate::dynamics::LagrangianSpec;
use crate::error::{Error, Result};
use crate::geometry::ChartPoint;
use crate::scalar::Real;
use crate::weakkam::grid::{Grid, ValueFunction};

/// One interpolation tap: a weight and, per node, the flat index it reads.
#[derive(Debug, Clone)]
pub struct GatherTap<T: Real> {
    pub weight: T,
    pub offset: Vec<i64>,
    pub idx: Vec<u32>,
}

/// Cost table plus interpolation stencil for one transfer direction.
#[derive(Debug, Clone)]
pub struct TransferTable<T: Real> {
    /// One-step action per node (target node for the backward direction,
    /// source node for the forward direction).
    pub cost: Vec<T>,
    pub taps: Vec<GatherTap<T>>,
}

/// One candidate displacement of the semi-Lagrangian step.
#[derive(Debug, Clone)]
pub struct Candidate<T: Real> {
    /// Displacement in sub-lattice units of `Δx / substeps`.
    pub steps: Vec<i64>,
    /// Physical displacement.
    pub disp: DVector<T>,
    /// `A_dt(x − d → x)` indexed by the target node, with the foot stencil.
    pub back: TransferTable<T>,
    /// `A_dt(x → x + d)` indexed by the source node, with the head stencil.
    pub fwd: TransferTable<T>,
}

/// Semi-Lagrangian one-step action kernel on a periodic grid.
///
/// Candidate displacements run over the refined lattice
/// `{−r·m..r·m}ⁿ · Δx/m` (`m = substeps`); one-step costs use straight
/// chart segments with trapezoidal endpoint averaging of the metric and the
/// potential, and the exact line integral of the closed form. Foot values
/// are read through periodic multilinear interpolation, which keeps the
/// Lax-Oleinik operators monotone, constant-commuting and 1-Lipschitz
/// exactly.
pub struct ActionKernel<T: Real> {
    pub grid: Grid,
    pub dt: T,
    pub stencil_radius: usize,
    pub substeps: usize,
    pub candidates: Vec<Candidate<T>>,
    pub warnings: Vec<String>,
    pub spec: LagrangianSpec<T>,
}

impl<T: Real> ActionKernel<T> {
    /// Analytic one-step cost of the straight chart segment from `from`
    /// along raw displacement `disp` (trapezoidal endpoint averaging plus
    /// the exact ω line integral).
    pub fn segment_cost(&self, from: &ChartPoint<T>, disp: &DVector<T>) -> T {
        segment_cost(&self.spec, self.dt, from, disp)
    }

    /// Negative Lax-Oleinik sweep:
    /// `T⁻u(x) = min_d { I[u](x − d) + A(x−d → x) }`.
    pub fn lax_minus(&self, u: &ValueFunction<T>) -> ValueFunction<T> {
        self.lax_minus_impl(u).0
    }

    /// Same sweep, also returning the argmin candidate per node
    /// (first-best in the lexicographic candidate order).
    pub fn lax_minus_with_argmin(&self, u: &ValueFunction<T>) -> (ValueFunction<T>, Vec<u32>) {
        self.lax_minus_impl(u)
    }

    fn lax_minus_impl(&self, u: &ValueFunction<T>) -> (ValueFunction<T>, Vec<u32>) {
        assert_eq!(u.grid, self.grid, "kernel and value function share the grid");
        let len = self.grid.len();
        let chunk = 2048.min(len);
        let mut values = vec![T::zero(); len];
        let mut arg = vec![0u32; len];
        // Candidate-major streaming per node chunk keeps the cost and index
        // tables sequential in memory.
        values
            .par_chunks_mut(chunk)
            .zip(arg.par_chunks_mut(chunk))
            .enumerate()
            .for_each(|(ch, (vals, args))| {
                let lo = ch * chunk;
                let hi = lo + vals.len();
                vals.fill(T::of(f64::INFINITY));
                for (ci, c) in self.candidates.iter().enumerate() {
                    let cost = &c.back.cost[lo..hi];
                    match c.back.taps.len() {
                        1 => {
                            let t0 = &c.back.taps[0];
                            let w0 = t0.weight;
                            let i0 = &t0.idx[lo..hi];
                            for k in 0..vals.len() {
                                let v = cost[k] + w0 * u.values[i0[k] as usize];
                                if v < vals[k] {
                                    vals[k] = v;
                                    args[k] = ci as u32;
                                }
                            }
                        }
                        2 => {
                            let (t0, t1) = (&c.back.taps[0], &c.back.taps[1]);
                            let (w0, w1) = (t0.weight, t1.weight);
                            let (i0, i1) = (&t0.idx[lo..hi], &t1.idx[lo..hi]);
                            for k in 0..vals.len() {
                                let v = cost[k]
                                    + w0 * u.values[i0[k] as usize]
                                    + w1 * u.values[i1[k] as usize];
                                if v < vals[k] {
                                    vals[k] = v;
                                    args[k] = ci as u32;
                                }
                            }
                        }
                        4 => {
                            let t = &c.back.taps;
                            let (w0, w1, w2, w3) =
                                (t[0].weight, t[1].weight, t[2].weight, t[3].weight);
                            let i0 = &t[0].idx[lo..hi];
                            let i1 = &t[1].idx[lo..hi];
                            let i2 = &t[2].idx[lo..hi];
                            let i3 = &t[3].idx[lo..hi];
                            for k in 0..vals.len() {
                                let v = cost[k]
                                    + w0 * u.values[i0[k] as usize]
                                    + w1 * u.values[i1[k] as usize]
                                    + w2 * u.values[i2[k] as usize]
                                    + w3 * u.values[i3[k] as usize];
                                if v < vals[k] {
                                    vals[k] = v;
                                    args[k] = ci as u32;
                                }
                            }
                        }
                        _ => {
                            for k in 0..vals.len() {
                                let mut v = cost[k];
                                for tap in &c.back.taps {
                                    v += tap.weight * u.values[tap.idx[lo + k] as usize];
                                }
                                if v < vals[k] {
                                    vals[k] = v;
                                    args[k] = ci as u32;
                                }
                            }
                        }
                    }
                }
            });
        let vf = ValueFunction {
            grid: self.grid.clone(),
            values,
        };
        (vf, arg)
    }

    /// Positive Lax-Oleinik sweep:
    /// `T⁺u(x) = max_d { I[u](x + d) − A(x → x+d) }`.
    pub fn lax_plus(&self, u: &ValueFunction<T>) -> ValueFunction<T> {
        assert_eq!(u.grid, self.grid, "kernel and value function share the grid");
        let len = self.grid.len();
        let chunk = 2048.min(len);
        let mut values = vec![T::zero(); len];
        values.par_chunks_mut(chunk).enumerate().for_each(|(ch, vals)| {
            let lo = ch * chunk;
            let hi = lo + vals.len();
            vals.fill(T::of(f64::NEG_INFINITY));
            for c in &self.candidates {
                let cost = &c.fwd.cost[lo..hi];
                for k in 0..vals.len() {
                    let mut v = -cost[k];
                    for tap in &c.fwd.taps {
                        v += tap.weight * u.values[tap.idx[lo + k] as usize];
                    }
                    if v > vals[k] {
                        vals[k] = v;
                    }
                }
            }
        });
        ValueFunction {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Index of the candidate with the given sub-lattice steps, if present.
    pub fn candidate_by_steps(&self, steps: &[i64]) -> Option<usize> {
        self.candidates.iter().position(|c| c.steps == steps)
    }
}

/// Analytic one-step cost shared by the kernel tables and continuous
/// backtracking.
pub fn segment_cost<T: Real>(
    spec: &LagrangianSpec<T>,
    dt: T,
    from: &ChartPoint<T>,
    disp: &DVector<T>,
) -> T {
    let to = from.translate(disp);
    let q_from = spec.metric.inner(from, disp, disp);
    let q_to = spec.metric.inner(&to, disp, disp);
    let f_avg = (spec.potential.value(from) + spec.potential.value(&to)) * T::of(0.5);
    let kin = (q_from + q_to) / (T::of(4.0) * dt);
    let omega_line =
        spec.form.constants().dot(disp) + spec.form.potential(&to) - spec.form.potential(from);
    kin - dt * f_avg + dt * spec.c - omega_line
}

/// Multilinear stencil (offsets and weights) for the point at fractional
/// index displacement `step_units / substeps` from a node.
fn interp_offsets<T: Real>(dim: usize, substeps: usize, step_units: &[i64]) -> Vec<(Vec<i64>, T)> {
    let m = substeps as i64;
    let mut fls = vec![0i64; dim];
    let mut frs = vec![0i64; dim];
    for a in 0..dim {
        fls[a] = step_units[a].div_euclid(m);
        frs[a] = step_units[a].rem_euclid(m);
    }
    let mut out: Vec<(Vec<i64>, T)> = vec![(fls.clone(), T::one())];
    for a in 0..dim {
        if frs[a] == 0 {
            continue;
        }
        let w_hi = T::of(frs[a] as f64 / substeps as f64);
        let w_lo = T::one() - w_hi;
        let mut next = Vec::with_capacity(out.len() * 2);
        for (off, w) in out {
            let mut hi = off.clone();
            hi[a] += 1;
            next.push((off, w * w_lo));
            next.push((hi, w * w_hi));
        }
        out = next;
    }
    out
}

/// Flat index table for a fixed periodic offset.
fn offset_index_table(grid: &Grid, offset: &[i64]) -> Vec<u32> {
    let len = grid.len();
    let mut out = vec![0u32; len];
    let mut idx = vec![0usize; grid.dim];
    for (flat, slot) in out.iter_mut().enumerate().take(len) {
        let mut shifted = 0usize;
        for a in 0..grid.dim {
            shifted = shifted * grid.n + grid.wrap_axis(idx[a] as i64 + offset[a]);
        }
        *slot = shifted as u32;
        // Increment the multi-index (row-major, last axis fastest).
        for a in (0..grid.dim).rev() {
            idx[a] += 1;
            if idx[a] < grid.n {
                break;
            }
            idx[a] = 0;
        }
        let _ = flat;
    }
    out
}

/// Builds the action kernel for a spec on a grid.
///
/// Requirements: `dt > 0`, `r ≥ 1`, `substeps ≥ 1`, stencil speed
/// `r·Δx/dt` within the spec's velocity cap, and `2r < N` so minimal
/// displacements stay unambiguous. A warning is recorded when the stencil
/// speed falls below the rough optimal-speed estimate
/// `max|ω♯|_g + √(2·range f)`.
pub fn build_kernel<T: Real>(
    spec: &LagrangianSpec<T>,
    grid: &Grid,
    dt: T,
    r: usize,
    substeps: usize,
) -> Result<ActionKernel<T>> {
    if dt <= T::zero() {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    if r < 1 || substeps < 1 {
        return Err(Error::InvalidArgument(
            "stencil radius and substeps must be at least 1".into(),
        ));
    }
    if 2 * r >= grid.n {
        return Err(Error::InvalidArgument(format!(
            "stencil radius {r} too large for {} nodes per axis",
            grid.n
        )));
    }
    if grid.dim != spec.dim() {
        return Err(Error::InvalidArgument(
            "grid and spec dimension differ".into(),
        ));
    }
    let h = grid.spacing::<T>();
    let stencil_speed = T::of(r as f64) * h / dt;
    if stencil_speed > spec.v_max {
        return Err(Error::InvalidArgument(format!(
            "stencil speed {} exceeds the velocity cap {}",
            stencil_speed.as_f64(),
            spec.v_max.as_f64()
        )));
    }

    let dim = grid.dim;
    let m = substeps as i64;
    let rm = r as i64 * m;
    let len = grid.len();

    // Sampled speed scale of the system, for the warning channel.
    let mut warnings = Vec::new();
    {
        let mut f_min = T::of(f64::INFINITY);
        let mut f_max = T::of(f64::NEG_INFINITY);
        let mut omega_speed = T::zero();
        let probe = Grid::new(dim, grid.n.min(16));
        for flat in probe.nodes() {
            let x = probe.node_point::<T>(flat);
            spec.metric.check_spd(&x)?;
            let f = spec.potential.value(&x);
            f_min = f_min.min(f);
            f_max = f_max.max(f);
            let om = spec.form.at(&x);
            let sharp = spec.metric.sharp(&x, &om)?;
            omega_speed = omega_speed.max(spec.metric.inner(&x, &sharp, &sharp).sqrt());
        }
        let expected = omega_speed + (T::of(2.0) * (f_max - f_min)).sqrt();
        if stencil_speed < expected {
            warnings.push(format!(
                "stencil speed {:.4} below the expected optimal speed {:.4}; enlarge r or dt",
                stencil_speed.as_f64(),
                expected.as_f64()
            ));
        }
    }

    // Candidate step vectors in lexicographic order: the deterministic
    // tie-break order of every argmin.
    let mut all_steps: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..dim {
        let mut next = Vec::with_capacity(all_steps.len() * (2 * rm as usize + 1));
        for s in &all_steps {
            for j in -rm..=rm {
                let mut v = s.clone();
                v.push(j);
                next.push(v);
            }
        }
        all_steps = next;
    }

    // Sample tables per fractional residue class: metric quadratic data, f
    // and φ on the grids shifted by −(res/m)·Δx.
    let n_frac = substeps.pow(dim as u32);
    let frac_id = |res: &[i64]| -> usize {
        let mut id = 0usize;
        for a in 0..dim {
            id = id * substeps + res[a] as usize;
        }
        id
    };
    struct FracTables<T> {
        g: Vec<T>,
        f: Vec<T>,
        phi: Vec<T>,
    }
    let tables: Vec<FracTables<T>> = (0..n_frac)
        .into_par_iter()
        .map(|id| {
            let mut res = vec![0i64; dim];
            let mut rest = id;
            for a in (0..dim).rev() {
                res[a] = (rest % substeps) as i64;
                rest /= substeps;
            }
            let shift =
                DVector::from_fn(dim, |a, _| -T::of(res[a] as f64 / substeps as f64) * h);
            let mut g = vec![T::zero(); len * dim * dim];
            let mut f = vec![T::zero(); len];
            let mut phi = vec![T::zero(); len];
            for flat in grid.nodes() {
                let p = grid.node_point::<T>(flat).translate(&shift);
                let gm = spec.metric.at(&p);
                for i in 0..dim {
                    for j in 0..dim {
                        g[(flat * dim + i) * dim + j] = gm[(i, j)];
                    }
                }
                f[flat] = spec.potential.value(&p);
                phi[flat] = spec.form.potential(&p);
            }
            FracTables { g, f, phi }
        })
        .collect();

    let quad = |tab: &FracTables<T>, flat: usize, d: &DVector<T>| -> T {
        let mut s = T::zero();
        for i in 0..dim {
            for j in 0..dim {
                s += tab.g[(flat * dim + i) * dim + j] * d[i] * d[j];
            }
        }
        s
    };

    // Residue-class table and integer offset for a point `x + fl + fr/m`.
    let resolve = |fl: &[i64], fr: &[i64]| -> (usize, Vec<i64>) {
        let mut res = vec![0i64; dim];
        let mut off = fl.to_vec();
        for a in 0..dim {
            if fr[a] != 0 {
                res[a] = m - fr[a];
                off[a] += 1;
            }
        }
        (frac_id(&res), off)
    };

    let cc = spec.form.constants().clone();
    let candidates: Vec<Candidate<T>> = all_steps
        .into_par_iter()
        .map(|steps| {
            let disp =
                DVector::from_fn(dim, |a, _| T::of(steps[a] as f64 / substeps as f64) * h);
            let mut back_fl = vec![0i64; dim];
            let mut back_fr = vec![0i64; dim];
            let mut fwd_fl = vec![0i64; dim];
            let mut fwd_fr = vec![0i64; dim];
            for a in 0..dim {
                back_fl[a] = (-steps[a]).div_euclid(m);
                back_fr[a] = (-steps[a]).rem_euclid(m);
                fwd_fl[a] = steps[a].div_euclid(m);
                fwd_fr[a] = steps[a].rem_euclid(m);
            }
            let (back_tab, back_off) = resolve(&back_fl, &back_fr);
            let (fwd_tab, fwd_off) = resolve(&fwd_fl, &fwd_fr);
            let back_idx = offset_index_table(grid, &back_off);
            let fwd_idx = offset_index_table(grid, &fwd_off);
            let tab0 = &tables[0];
            let tb = &tables[back_tab];
            let tf = &tables[fwd_tab];
            let four_dt = T::of(4.0) * dt;
            let half = T::of(0.5);
            let cdotd = cc.dot(&disp);
            let mut cost_to = vec![T::zero(); len];
            let mut cost_from = vec![T::zero(); len];
            for x in 0..len {
                let foot = back_idx[x] as usize;
                let q_y = quad(tb, foot, &disp);
                let q_x = quad(tab0, x, &disp);
                cost_to[x] = (q_y + q_x) / four_dt
                    - dt * half * (tb.f[foot] + tab0.f[x])
                    + dt * spec.c
                    - cdotd
                    - (tab0.phi[x] - tb.phi[foot]);
                let head = fwd_idx[x] as usize;
                let q_z = quad(tf, head, &disp);
                cost_from[x] = (q_x + q_z) / four_dt
                    - dt * half * (tab0.f[x] + tf.f[head])
                    + dt * spec.c
                    - cdotd
                    - (tf.phi[head] - tab0.phi[x]);
            }
            let neg_steps: Vec<i64> = steps.iter().map(|s| -s).collect();
            let back_taps = interp_offsets::<T>(dim, substeps, &neg_steps)
                .into_iter()
                .map(|(off, w)| GatherTap {
                    weight: w,
                    idx: offset_index_table(grid, &off),
                    offset: off,
                })
                .collect();
            let fwd_taps = interp_offsets::<T>(dim, substeps, &steps)
                .into_iter()
                .map(|(off, w)| GatherTap {
                    weight: w,
                    idx: offset_index_table(grid, &off),
                    offset: off,
                })
                .collect();
            Candidate {
                steps,
                disp,
                back: TransferTable {
                    cost: cost_to,
                    taps: back_taps,
                },
                fwd: TransferTable {
                    cost: cost_from,
                    taps: fwd_taps,
                },
            }
        })
        .collect();

    Ok(ActionKernel {
        grid: grid.clone(),
        dt,
        stencil_radius: r,
        substeps,
        candidates,
        warnings,
        spec: spec.clone(),
    })
}
