use std::collections::HashMap;
use std::sync::Mutex;

use crate::geometry::ChartPoint;
use crate::scalar::Real;
use crate::variation::ActionOracle;
use crate::weakkam::grid::ValueFunction;
use crate::weakkam::kernel::ActionKernel;

/// Cap standing in for +∞ in dynamic-programming initializations.
pub const BIG: f64 = 1e9;

/// Critical-value estimate from the normalized value iteration.
#[derive(Debug, Clone)]
pub struct CriticalValueEstimate<T: Real> {
    pub c: T,
    /// Fixed-point residual `‖T⁻u + c·dt − u‖∞` of the returned solution.
    pub residual: T,
    pub iterations: usize,
    pub converged: bool,
    /// Per-iteration estimates `−shift_k/dt`.
    pub history: Vec<T>,
}

/// Iterates `u ← T⁻u − min(T⁻u)` until the sup-change drops below `tol`.
/// The critical value is the mean of `−shift/dt` over the last quarter of
/// the iterations; the returned solution is anchor-normalized at node 0.
pub fn estimate_critical_value<T: Real>(
    kernel: &ActionKernel<T>,
    tol: T,
    max_iters: usize,
    u0: Option<ValueFunction<T>>,
) -> (CriticalValueEstimate<T>, ValueFunction<T>) {
    let mut u = u0.unwrap_or_else(|| ValueFunction::zeros(kernel.grid.clone()));
    let mut history: Vec<T> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        let tu = kernel.lax_minus(&u);
        let shift = tu.min();
        let mut next = tu;
        for v in next.values.iter_mut() {
            *v -= shift;
        }
        let delta = next.sup_diff(&u);
        history.push(-shift / kernel.dt);
        u = next;
        iterations += 1;
        if delta <= tol {
            converged = true;
            break;
        }
    }
    let tail = (history.len() / 4).max(1);
    let mut c = T::zero();
    for v in history.iter().rev().take(tail) {
        c += *v;
    }
    c /= T::of(tail as f64);
    // Fixed-point residual with the estimated c.
    let tu = kernel.lax_minus(&u);
    let mut residual = T::zero();
    for x in kernel.grid.nodes() {
        residual = residual.max((tu.values[x] + c * kernel.dt - u.values[x]).abs());
    }
    (
        CriticalValueEstimate {
            c,
            residual,
            iterations,
            converged,
            history,
        },
        u.anchor_normalized(),
    )
}

/// Dynamic-programming approximation of the generating function
/// `A_{k·dt}(x, ·)`: point-source initialization capped at [`BIG`], swept
/// forward `t_steps` times.
pub fn dp_action<T: Real>(
    kernel: &ActionKernel<T>,
    origin: usize,
    t_steps: usize,
) -> ValueFunction<T> {
    dp_action_ladder(kernel, origin, &[t_steps]).pop().unwrap()
}

/// Runs one DP pass recording snapshots at each requested step count
/// (sorted ascending internally, returned in the requested order).
pub fn dp_action_ladder<T: Real>(
    kernel: &ActionKernel<T>,
    origin: usize,
    checkpoints: &[usize],
) -> Vec<ValueFunction<T>> {
    let big = T::of(BIG);
    let mut v = ValueFunction::constant(kernel.grid.clone(), big);
    v.values[origin] = T::zero();
    let mut sorted: Vec<usize> = checkpoints.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut snaps: HashMap<usize, ValueFunction<T>> = HashMap::new();
    if sorted.first() == Some(&0) {
        snaps.insert(0, v.clone());
    }
    let last = *sorted.last().unwrap_or(&0);
    for k in 1..=last {
        v = kernel.lax_minus(&v);
        for val in v.values.iter_mut() {
            *val = val.min(big);
        }
        if sorted.binary_search(&k).is_ok() {
            snaps.insert(k, v.clone());
        }
    }
    checkpoints
        .iter()
        .map(|k| snaps.get(k).expect("checkpoint recorded").clone())
        .collect()
}

/// Interpolating view of DP tables from a fixed origin, with a cache over
/// horizons; the [`ActionOracle`] used by cut-point classification.
pub struct DpOracle<'a, T: Real> {
    kernel: &'a ActionKernel<T>,
    origin: usize,
    tolerance: T,
    cache: Mutex<HashMap<usize, ValueFunction<T>>>,
}

impl<'a, T: Real> DpOracle<'a, T> {
    pub fn new(kernel: &'a ActionKernel<T>, origin: usize, tolerance: T) -> Self {
        Self {
            kernel,
            origin,
            tolerance,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn table(&self, t_steps: usize) -> ValueFunction<T> {
        let mut cache = self.cache.lock().unwrap();
        if let Some(v) = cache.get(&t_steps) {
            return v.clone();
        }
        // Continue from the largest cached horizon below the target.
        let base = cache.keys().copied().filter(|k| *k < t_steps).max();
        let (mut v, mut k) = match base {
            Some(b) => (cache.get(&b).unwrap().clone(), b),
            None => {
                let big = T::of(BIG);
                let mut v = ValueFunction::constant(self.kernel.grid.clone(), big);
                v.values[self.origin] = T::zero();
                (v, 0)
            }
        };
        let big = T::of(BIG);
        while k < t_steps {
            v = self.kernel.lax_minus(&v);
            for val in v.values.iter_mut() {
                *val = val.min(big);
            }
            k += 1;
        }
        cache.insert(t_steps, v.clone());
        v
    }
}

impl<T: Real> ActionOracle<T> for DpOracle<'_, T> {
    fn action_to(&self, y: &ChartPoint<T>, tau: T) -> Option<T> {
        let steps_f = (tau / self.kernel.dt).round();
        let steps = steps_f.as_f64() as usize;
        if steps == 0 || (steps_f * self.kernel.dt - tau).abs() > T::of(1e-9) {
            return None;
        }
        Some(self.table(steps).interpolate(y))
    }

    fn tolerance(&self) -> T {
        self.tolerance
    }
}
