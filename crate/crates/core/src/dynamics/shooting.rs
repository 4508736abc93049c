//! Two-point boundary solves for extremals: Newton shooting on the endpoint
//! map `v₀ ↦ π∘Φ_t(x, v₀)` with the target prescribed as an unwrapped lift,
//! and multi-start search for distinct minimizers.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{LagrangianSpec, PhaseState, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::ChartPoint;
use crate::scalar::Real;

/// A converged shooting solution.
#[derive(Debug, Clone)]
pub struct ShotExtremal<T: Real> {
    pub v0: DVector<T>,
    pub trajectory: Trajectory<T>,
    pub action: T,
    /// Unwrapped displacement actually achieved over `[0, t]`.
    pub lift: DVector<T>,
    pub endpoint_error: T,
}

/// Unwrapped displacement of a trajectory from its first to its last sample.
pub fn trajectory_lift<T: Real>(traj: &Trajectory<T>) -> DVector<T> {
    let n = traj.state_at_index(0).x.dim();
    let mut lift = DVector::zeros(n);
    for pair in traj.samples().windows(2) {
        lift += pair[0].1.x.displacement_to(&pair[1].1.x);
    }
    lift
}

fn endpoint_lift<T: Real>(
    spec: &LagrangianSpec<T>,
    x: &ChartPoint<T>,
    v0: &DVector<T>,
    t: T,
    dt: T,
) -> Result<(Trajectory<T>, DVector<T>)> {
    let steps = (t / dt).round().as_f64().max(1.0) as usize;
    let h = t / T::of(steps as f64);
    let traj = spec.integrate_flow(&PhaseState::new(x.clone(), v0.clone()), t, h)?;
    let lift = trajectory_lift(&traj);
    Ok((traj, lift))
}

/// Newton shooting: finds `v₀` with `π∘Φ_t(x, v₀) = x + target_lift` as an
/// unwrapped displacement. The Jacobian of the endpoint map is formed by
/// central differences in the initial velocity.
pub fn shoot<T: Real>(
    spec: &LagrangianSpec<T>,
    x: &ChartPoint<T>,
    target_lift: &DVector<T>,
    t: T,
    dt: T,
    v0_guess: &DVector<T>,
    tol: T,
    max_iter: usize,
) -> Result<ShotExtremal<T>> {
    let n = spec.dim();
    let mut v0 = v0_guess.clone();
    let fd = T::of(1e-6);
    for _ in 0..max_iter {
        let (traj, lift) = endpoint_lift(spec, x, &v0, t, dt)?;
        let resid = &lift - target_lift;
        let err = resid.amax();
        if err <= tol {
            let action = spec.action(&traj);
            return Ok(ShotExtremal {
                v0,
                trajectory: traj,
                action,
                lift,
                endpoint_error: err,
            });
        }
        let mut jac = nalgebra::DMatrix::<T>::zeros(n, n);
        for j in 0..n {
            let mut vp = v0.clone();
            vp[j] += fd;
            let (_, lp) = endpoint_lift(spec, x, &vp, t, dt)?;
            let mut vm = v0.clone();
            vm[j] -= fd;
            let (_, lm) = endpoint_lift(spec, x, &vm, t, dt)?;
            for i in 0..n {
                jac[(i, j)] = (lp[i] - lm[i]) / (T::of(2.0) * fd);
            }
        }
        let delta = jac
            .lu()
            .solve(&resid)
            .ok_or_else(|| Error::Numerical("singular shooting Jacobian (conjugate endpoint?)".into()))?;
        v0 -= delta;
    }
    Err(Error::NonConvergence(format!(
        "shooting did not converge to the target lift within {max_iter} Newton steps"
    )))
}

/// A candidate minimizer found by multi-start shooting.
#[derive(Debug, Clone)]
pub struct Minimizer<T: Real> {
    pub extremal: ShotExtremal<T>,
}

/// Multi-start search for extremals from `x` to `y` in time `t`, over all
/// integer lift offsets with `‖offset‖∞ ≤ lift_radius` around the minimal
/// displacement, each with `starts` randomized initial velocities. Converged
/// solutions are deduplicated by initial velocity and sorted by action.
#[allow(clippy::too_many_arguments)]
pub fn multi_start_minimizers<T: Real>(
    spec: &LagrangianSpec<T>,
    x: &ChartPoint<T>,
    y: &ChartPoint<T>,
    t: T,
    dt: T,
    starts: usize,
    lift_radius: i64,
    seed: u64,
) -> Vec<Minimizer<T>> {
    let n = spec.dim();
    let base = x.displacement_to(y);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offsets: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for o in &offsets {
            for j in -lift_radius..=lift_radius {
                let mut v = o.clone();
                v.push(j);
                next.push(v);
            }
        }
        offsets = next;
    }
    let mut found: Vec<Minimizer<T>> = Vec::new();
    for off in offsets {
        let lift = DVector::from_fn(n, |i, _| base[i] + T::of(off[i] as f64));
        // Skip targets needing speeds beyond the cap.
        if lift.norm() / t > spec.v_max {
            continue;
        }
        let straight = &lift / t;
        for s in 0..starts {
            let guess = if s == 0 {
                straight.clone()
            } else {
                let jitter = DVector::from_fn(n, |_, _| T::of(rng.gen_range(-0.5..0.5)));
                &straight + jitter
            };
            let Ok(sol) = shoot(spec, x, &lift, t, dt, &guess, T::of(1e-9), 40) else {
                continue;
            };
            let duplicate = found
                .iter()
                .any(|m| (&m.extremal.v0 - &sol.v0).amax() < T::of(1e-6));
            if !duplicate {
                found.push(Minimizer { extremal: sol });
            }
        }
    }
    found.sort_by(|a, b| a.extremal.action.partial_cmp(&b.extremal.action).unwrap());
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::trig_field;
    use crate::geometry::{ClosedOneForm, MetricField, ScalarField};

    #[test]
    fn shoot_hits_straight_target_on_flat() {
        let spec = LagrangianSpec::kinetic(MetricField::<f64>::flat(2));
        let x = ChartPoint::from_slice(&[0.2, 0.3]);
        let lift = DVector::from_row_slice(&[0.4, -0.1]);
        let guess = DVector::from_row_slice(&[0.1, 0.1]);
        let sol = shoot(&spec, &x, &lift, 1.0, 1e-2, &guess, 1e-10, 30).unwrap();
        assert!((&sol.v0 - &lift).amax() < 1e-9);
        assert!((sol.action - 0.5 * (0.4f64.powi(2) + 0.1f64.powi(2))).abs() < 1e-9);
    }

    #[test]
    fn shoot_in_potential_hits_target() {
        let spec = LagrangianSpec::new(
            MetricField::flat(2),
            trig_field(2, 0.05, 0, 1, true),
            ClosedOneForm::zero(2),
            0.0,
        );
        let x = ChartPoint::from_slice(&[0.1, 0.2]);
        let lift = DVector::from_row_slice(&[0.3, 0.25]);
        let guess = DVector::from_row_slice(&[0.3, 0.25]);
        let sol = shoot(&spec, &x, &lift, 1.0, 1e-3, &guess, 1e-10, 30).unwrap();
        assert!(sol.endpoint_error < 1e-10);
        // Endpoint lands on the wrapped target.
        let end = sol.trajectory.samples().last().unwrap().1.x.clone();
        let target = x.translate(&lift);
        assert!(end.chart_distance(&target) < 1e-9);
    }

    #[test]
    fn multi_start_finds_both_half_wraps() {
        // Flat torus, endpoints half a period apart along axis 0: two equal
        // minimizers with opposite winding.
        let spec = LagrangianSpec::kinetic(MetricField::<f64>::flat(2));
        let x = ChartPoint::from_slice(&[0.1, 0.5]);
        let y = ChartPoint::from_slice(&[0.6, 0.5]);
        let found = multi_start_minimizers(&spec, &x, &y, 1.0, 1e-2, 4, 1, 42);
        assert!(found.len() >= 2);
        let a0 = found[0].extremal.action;
        let a1 = found[1].extremal.action;
        assert!((a0 - 0.125).abs() < 1e-9);
        assert!((a1 - 0.125).abs() < 1e-9);
        assert!((found[0].extremal.v0[0] + found[1].extremal.v0[0]).abs() < 1e-6);
    }

    #[test]
    fn mane_spec_energy_zero_at_drift() {
        let spec = LagrangianSpec::mane(
            MetricField::<f64>::flat(2),
            ClosedOneForm::constant(DVector::from_row_slice(&[0.3, 0.4])),
        );
        // L_X(x, X) = 0 and H(x, L_v(x, X)) = 0.
        let state = PhaseState::new(
            ChartPoint::origin(2),
            DVector::from_row_slice(&[0.3, 0.4]),
        );
        assert!(spec.lagrangian(&state.x, &state.v).abs() < 1e-15);
        let h = spec.hamiltonian(&spec.legendre(&state)).unwrap();
        assert!(h.abs() < 1e-15);
        let _ = ScalarField::<f64>::zero();
    }
}
