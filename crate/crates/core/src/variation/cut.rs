use nalgebra::DVector;

use crate::dynamics::shooting::multi_start_minimizers;
use crate::dynamics::{LagrangianSpec, PhaseState};
use crate::error::Result;
use crate::geometry::ChartPoint;
use crate::scalar::Real;
use crate::variation::conjugate::conjugate_points;
use crate::variation::frames::propagate_jacobi_frame;

/// Supplies generating-function values `A_τ(x, ·)` for cut-point tests,
/// together with its own resolution.
pub trait ActionOracle<T: Real> {
    /// Approximate minimal action from the oracle's base point to `y` in
    /// time `tau`; `None` when the oracle cannot resolve that horizon.
    fn action_to(&self, y: &ChartPoint<T>, tau: T) -> Option<T>;
    /// Scheme tolerance of the oracle values.
    fn tolerance(&self) -> T;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutClass {
    NotCut,
    CutConjugate,
    CutMultipleMinimizer,
    Undetermined,
}

#[derive(Debug, Clone)]
pub struct CutReport<T: Real> {
    pub class: CutClass,
    /// Action of the extremal extended to `t + delta_t`.
    pub extended_action: T,
    /// Oracle value at the extended endpoint, when resolvable.
    pub oracle_action: Option<T>,
    /// `extended_action − oracle_action`.
    pub gap: Option<T>,
    pub conjugate_crossings: Vec<T>,
    pub conjugate_degenerate: Vec<T>,
    /// Initial velocity and action of a distinct minimizer, when found.
    pub second_minimizer: Option<(DVector<T>, T)>,
    pub notes: Vec<String>,
}

/// Parameters of the cut-point classification.
#[derive(Debug, Clone)]
pub struct CutParams<T: Real> {
    /// Extension beyond `t` used for the minimality probe.
    pub delta_t: T,
    /// Shooting starts per lift offset in the second-minimizer search.
    pub starts: usize,
    pub lift_radius: i64,
    pub seed: u64,
    /// Integrator step.
    pub dt: T,
}

impl<T: Real> Default for CutParams<T> {
    fn default() -> Self {
        Self {
            delta_t: T::of(0.05),
            starts: 32,
            lift_radius: 1,
            seed: 0,
            dt: T::of(1e-3),
        }
    }
}

/// Pure classification once the evidence has been gathered: a positive
/// minimality gap beyond tolerance means cut; the conjugate channel wins
/// when `det A` reached zero on `(0, t]`; otherwise a distinct equal-action
/// minimizer is required, else the verdict stays undetermined.
pub fn classify_cut<T: Real>(
    gap: Option<T>,
    tol: T,
    has_conjugate: bool,
    has_second_minimizer: bool,
) -> CutClass {
    match gap {
        None => CutClass::Undetermined,
        Some(g) if g <= tol => CutClass::NotCut,
        Some(_) => {
            if has_conjugate {
                CutClass::CutConjugate
            } else if has_second_minimizer {
                CutClass::CutMultipleMinimizer
            } else {
                CutClass::Undetermined
            }
        }
    }
}

/// Classifies whether `π∘Φ_t(x, v)` is a cut point of `x` along the extremal
/// from `(x, v)`: extends the extremal by `delta_t`, compares its action
/// against the dynamic-programming oracle at the extended endpoint, then
/// resolves the cut branch via the Jacobi frame and multi-start shooting.
pub fn is_cut_point<T: Real>(
    spec: &LagrangianSpec<T>,
    x: &ChartPoint<T>,
    v: &DVector<T>,
    t: T,
    oracle: &dyn ActionOracle<T>,
    params: &CutParams<T>,
) -> Result<CutReport<T>> {
    let mut notes = Vec::new();
    let t_ext = t + params.delta_t;
    let traj_ext = spec.integrate_flow(&PhaseState::new(x.clone(), v.clone()), t_ext, params.dt)?;
    let extended_action = spec.action(&traj_ext);
    let y_ext = traj_ext.samples().last().unwrap().1.x.clone();
    let oracle_action = oracle.action_to(&y_ext, t_ext);
    let gap = oracle_action.map(|a| extended_action - a);
    if oracle_action.is_none() {
        notes.push("oracle cannot resolve the extended horizon".into());
    }
    let tol = oracle.tolerance();

    // Evidence for the cut branches, gathered lazily.
    let mut crossings = Vec::new();
    let mut degenerate = Vec::new();
    let mut second: Option<(DVector<T>, T)> = None;
    if matches!(gap, Some(g) if g > tol) {
        let traj_t = spec.integrate_flow(&PhaseState::new(x.clone(), v.clone()), t, params.dt)?;
        let frame = propagate_jacobi_frame(spec, &traj_t)?;
        let report = conjugate_points(&frame);
        crossings = report.crossings;
        degenerate = report.degenerate;
        if crossings.is_empty() && degenerate.is_empty() {
            let y_t = traj_t.samples().last().unwrap().1.x.clone();
            let own_action = spec.action(&traj_t);
            let minimizers = multi_start_minimizers(
                spec,
                x,
                &y_t,
                t,
                params.dt,
                params.starts,
                params.lift_radius,
                params.seed,
            );
            if let Some(m) = minimizers.iter().find(|m| {
                (&m.extremal.v0 - v).amax() > T::of(1e-4)
                    && m.extremal.action <= own_action + tol
            }) {
                second = Some((m.extremal.v0.clone(), m.extremal.action));
            } else {
                notes.push(format!(
                    "no distinct minimizer among {} converged shots",
                    minimizers.len()
                ));
            }
        }
    }
    let class = classify_cut(
        gap,
        tol,
        !crossings.is_empty() || !degenerate.is_empty(),
        second.is_some(),
    );
    Ok(CutReport {
        class,
        extended_action,
        oracle_action,
        gap,
        conjugate_crossings: crossings,
        conjugate_degenerate: degenerate,
        second_minimizer: second,
        notes,
    })
}
