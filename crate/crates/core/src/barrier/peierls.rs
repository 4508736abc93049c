use crate::scalar::Real;
use crate::weakkam::{dp_action_ladder, ActionKernel, ValueFunction};

/// Peierls barrier slice `h(x, ·)` realized as a min over a horizon ladder
/// of `A_t(x, ·) + c·t`, with a stabilization check on the last two rungs.
#[derive(Debug, Clone)]
pub struct BarrierSlice<T: Real> {
    pub base: usize,
    pub h: ValueFunction<T>,
    /// Horizon ladder in steps of the kernel's `dt`.
    pub horizons: Vec<usize>,
    /// Sup-distance between the candidates at the last two horizons.
    pub last_delta: T,
    /// Whether `last_delta` stayed within the stability tolerance.
    pub stable: bool,
}

/// Default horizon ladder in time units.
pub const DEFAULT_HORIZONS: [f64; 4] = [5.0, 10.0, 20.0, 40.0];

/// Converts a time ladder to step counts for a kernel.
pub fn horizon_steps<T: Real>(kernel: &ActionKernel<T>, horizons: &[f64]) -> Vec<usize> {
    horizons
        .iter()
        .map(|t| (T::of(*t) / kernel.dt).round().as_f64() as usize)
        .collect()
}

/// Computes `h(x, ·) = min_t (A_t(x, ·) + c·t)` over the ladder. When the
/// candidates at the two largest horizons differ by more than
/// `stability_tol` in sup norm, the slice is flagged unstable (a larger
/// horizon is needed).
pub fn peierls_barrier<T: Real>(
    kernel: &ActionKernel<T>,
    c: T,
    base: usize,
    horizons: &[usize],
    stability_tol: T,
) -> BarrierSlice<T> {
    assert!(!horizons.is_empty());
    let mut sorted = horizons.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let tables = dp_action_ladder(kernel, base, &sorted);
    let mut candidates: Vec<ValueFunction<T>> = Vec::with_capacity(sorted.len());
    for (steps, table) in sorted.iter().zip(tables) {
        let shift = c * kernel.dt * T::of(*steps as f64);
        let mut cand = table;
        for v in cand.values.iter_mut() {
            *v += shift;
        }
        candidates.push(cand);
    }
    let last_delta = if candidates.len() >= 2 {
        candidates[candidates.len() - 1].sup_diff(&candidates[candidates.len() - 2])
    } else {
        T::zero()
    };
    let mut h = candidates[0].clone();
    for cand in &candidates[1..] {
        for (hv, cv) in h.values.iter_mut().zip(&cand.values) {
            *hv = hv.min(*cv);
        }
    }
    BarrierSlice {
        base,
        h,
        horizons: sorted,
        last_delta,
        stable: last_delta <= stability_tol,
    }
}
