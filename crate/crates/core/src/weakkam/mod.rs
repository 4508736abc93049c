//! Grid-based Lax-Oleinik value iteration: one-step action kernel, critical
//! value, weak KAM solutions, backward calibrated curves and the
//! dynamic-programming action oracle.

mod calibrated;
mod gradient;
mod grid;
mod kernel;
mod solve;

pub use calibrated::{
    backward_calibrated_curve, random_stencil_path, verify_domination, CalibratedCurve,
    DominationReport,
};
pub use gradient::{prop21_gradient_check, GradientCheckReport, GradientTarget};
pub use grid::{Grid, ValueFunction};
pub use kernel::{build_kernel, segment_cost, ActionKernel, Candidate, GatherTap, TransferTable};
pub use solve::{
    dp_action, dp_action_ladder, estimate_critical_value, CriticalValueEstimate, DpOracle, BIG,
};
