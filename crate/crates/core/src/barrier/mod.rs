//! Peierls barrier, projected Aubry set, Mather pseudo-metric and quotient;
//! support-function probes and barrier-sense Laplacian estimates.

mod hypothesis;
mod peierls;
mod probe;
mod quotient;

pub use hypothesis::{hypothesis_check_energy_surface, HypothesisReport, HypothesisSample};
pub use peierls::{horizon_steps, peierls_barrier, BarrierSlice, DEFAULT_HORIZONS};
pub use probe::{
    barrier_laplacian_estimate, support_function_probe, LaplacianEstimate, SupportFunctionProbe,
};
pub use quotient::{aubry_set, mather_quotient, MatherQuotientReport};
