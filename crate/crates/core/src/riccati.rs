//! Trace and matrix Riccati quantities along trajectories and the scalar
//! comparison machinery: the model solution `S_{n,k}`, the comparison bound
//! `n·Ṡ/S`, an integrated verification of the comparison inequality, and
//! `Θ(s) = tr(A⁻¹Ȧ)` extracted from Jacobi frames.

use nalgebra::DMatrix;

use crate::dynamics::LagrangianSpec;
use crate::error::{Error, Result};
use crate::geometry::ops::divergence_sharp;
use crate::io::fmt_g17;
use crate::scalar::Real;
use crate::variation::JacobiFrame;

/// Model solution `S_{n,k}`: `√(n/k)·sin(√(k/n)s)` for `k > 0`, `s` for
/// `k = 0`, `√(−n/k)·sinh(√(−k/n)s)` for `k < 0`.
pub fn comparison_function<T: Real>(n: usize, k: T, s: T) -> Result<T> {
    if s <= T::zero() {
        return Err(Error::Domain("comparison function needs s > 0".into()));
    }
    let nf = T::of(n as f64);
    if k > T::zero() {
        let w = (k / nf).sqrt();
        if s >= T::pi() / w {
            return Err(Error::Domain(format!(
                "s = {} beyond the first zero of S for k > 0",
                s.as_f64()
            )));
        }
        Ok((nf / k).sqrt() * (w * s).sin())
    } else if k == T::zero() {
        Ok(s)
    } else {
        let w = (-k / nf).sqrt();
        Ok((-nf / k).sqrt() * (w * s).sinh())
    }
}

/// Comparison bound `n·Ṡ_{n,k}(s)/S_{n,k}(s)`:
/// `√(nk)·cot(√(k/n)s)` for `k > 0`, `n/s` for `k = 0`,
/// `√(−nk)·coth(√(−k/n)s)` for `k < 0`.
pub fn riccati_bound<T: Real>(n: usize, k: T, s: T) -> Result<T> {
    if s <= T::zero() {
        return Err(Error::Domain("riccati bound needs s > 0".into()));
    }
    let nf = T::of(n as f64);
    if k > T::zero() {
        let w = (k / nf).sqrt();
        if s >= T::pi() / w {
            return Err(Error::Domain("s beyond the zero of S for k > 0".into()));
        }
        let t = (w * s).tan();
        if t == T::zero() {
            return Err(Error::Domain("bound singular at this s".into()));
        }
        Ok((nf * k).sqrt() / t)
    } else if k == T::zero() {
        Ok(nf / s)
    } else {
        let w = (-k / nf).sqrt();
        Ok((-(nf * k)).sqrt() / (w * s).tanh())
    }
}

/// Result of integrating `α̇ = −α²/n − k − slack(s)` against the bound.
#[derive(Debug, Clone)]
pub struct ComparisonReport<T: Real> {
    /// Sparse history `(s, α, bound)`.
    pub samples: Vec<(T, T, T)>,
    /// `max_s (α − bound)`, negative when the inequality is strict.
    pub max_violation: T,
    /// Smallest bound − α margin over the horizon.
    pub min_margin: T,
    pub final_alpha: T,
    /// Set when α fell below the blow-down threshold before the horizon.
    pub blow_down_at: Option<T>,
}

/// Integrates the scalar Riccati inequality from the asymptotic seed and
/// asserts `α(s) ≤ bound(s)` pointwise. Log-spaced RK4 resolves the `n/s`
/// blow-up at the left end.
pub fn verify_comparison<T: Real>(
    n: usize,
    k: T,
    s0: T,
    alpha0: T,
    horizon: T,
    slack: &dyn Fn(T) -> T,
) -> Result<ComparisonReport<T>> {
    if s0 <= T::zero() || horizon <= s0 {
        return Err(Error::InvalidArgument("need 0 < s0 < horizon".into()));
    }
    let nf = T::of(n as f64);
    let blow_down = T::of(-1e12);
    let rhs = |s: T, a: T| -a * a / nf - k - slack(s);
    let mut s = s0;
    let mut a = alpha0;
    let mut samples = Vec::new();
    let mut max_violation = T::of(f64::NEG_INFINITY);
    let mut min_margin = T::of(f64::INFINITY);
    let mut blow_down_at = None;
    let mut since_sample = 0usize;
    loop {
        let bound = riccati_bound(n, k, s)?;
        let viol = a - bound;
        max_violation = max_violation.max(viol);
        min_margin = min_margin.min(-viol);
        if since_sample == 0 {
            samples.push((s, a, bound));
        }
        since_sample = (since_sample + 1) % 50;
        if s >= horizon {
            break;
        }
        if a < blow_down {
            blow_down_at = Some(s);
            break;
        }
        let h = (T::of(1e-3) * s).min(T::of(0.01)).min(horizon - s);
        // Scalar RK4 step.
        let k1 = rhs(s, a);
        let half = T::of(0.5);
        let k2 = rhs(s + half * h, a + half * h * k1);
        let k3 = rhs(s + half * h, a + half * h * k2);
        let k4 = rhs(s + h, a + h * k3);
        a += h / T::of(6.0) * (k1 + T::of(2.0) * (k2 + k3) + k4);
        s += h;
    }
    samples.push((s, a, riccati_bound(n, k, s)?));
    Ok(ComparisonReport {
        samples,
        max_violation,
        min_margin,
        final_alpha: a,
        blow_down_at,
    })
}

/// One Θ sample along a trajectory.
#[derive(Debug, Clone)]
pub struct ThetaSample<T: Real> {
    pub s: T,
    /// `tr(A⁻¹Ȧ)`; `None` where `det A` fell below the floor.
    pub theta: Option<T>,
    /// `div ω♯(ρ(s))`.
    pub div_correction: T,
    /// `Ric(ρ̇) + Δf` sampled as `tr(R(s) + ∇²f(s))` in the parallel frame.
    pub coeff_trace: T,
    /// `Θ̇ + Θ²/n + Ric + Δf`, five-point differenced; `≤ 0` up to noise.
    pub residual: Option<T>,
    pub bound: Option<T>,
}

/// Θ trace with the comparison data derived from it.
#[derive(Debug, Clone)]
pub struct RiccatiTrace<T: Real> {
    pub samples: Vec<ThetaSample<T>>,
    /// `min_s (Ric(ρ̇) + Δf)`: the constant fed to the comparison bound.
    pub k_min: T,
    pub det_floor: T,
    /// First sample time at which `det A` fell below the floor, if any.
    pub truncated_at: Option<T>,
}

pub const DEFAULT_DET_FLOOR: f64 = 1e-12;

/// `Λ(s) = A⁻¹(s)Ȧ(s)` at sample `idx`, `None` past the determinant floor.
pub fn lambda_at<T: Real>(frame: &JacobiFrame<T>, idx: usize, det_floor: T) -> Option<DMatrix<T>> {
    if frame.det_a[idx].abs() <= det_floor {
        return None;
    }
    let inv = frame.a[idx].clone().try_inverse()?;
    Some(inv * &frame.adot[idx])
}

/// Extracts `Θ(s) = tr(A⁻¹Ȧ)` from a propagated frame, with the divergence
/// correction, the sampled `Ric + Δf`, the comparison bound at the inferred
/// `k_min`, and a smoothed inequality residual.
pub fn theta_along<T: Real>(
    spec: &LagrangianSpec<T>,
    frame: &JacobiFrame<T>,
    det_floor: T,
) -> Result<RiccatiTrace<T>> {
    let n = frame.dim();
    let nf = T::of(n as f64);
    let len = frame.len();
    let mut theta: Vec<Option<T>> = Vec::with_capacity(len);
    let mut truncated_at = None;
    for idx in 0..len {
        let l = lambda_at(frame, idx, det_floor);
        if l.is_none() && idx > 0 && truncated_at.is_none() {
            truncated_at = Some(frame.times[idx]);
        }
        theta.push(l.map(|m| m.trace()));
    }
    let coeff_trace: Vec<T> = frame.coeff.iter().map(|c| c.trace()).collect();
    let k_min = coeff_trace
        .iter()
        .copied()
        .fold(T::of(f64::INFINITY), |a, b| a.min(b));
    let div_x: Vec<T> = if frame.states.is_empty() {
        vec![T::zero(); len]
    } else {
        frame
            .states
            .iter()
            .map(|st| divergence_sharp(&spec.metric, &spec.form, &st.x, T::of(1e-5)))
            .collect::<Result<_>>()?
    };
    let h = if len > 1 {
        frame.times[1] - frame.times[0]
    } else {
        T::one()
    };
    let mut samples = Vec::with_capacity(len);
    for idx in 0..len {
        let s = frame.times[idx];
        // Five-point centered derivative of Θ where the stencil is intact.
        let residual = if idx >= 2 && idx + 2 < len {
            match (
                theta[idx - 2],
                theta[idx - 1],
                theta[idx],
                theta[idx + 1],
                theta[idx + 2],
            ) {
                (Some(m2), Some(m1), Some(t0), Some(p1), Some(p2)) => {
                    let dtheta = (m2 - T::of(8.0) * m1 + T::of(8.0) * p1 - p2)
                        / (T::of(12.0) * h);
                    Some(dtheta + t0 * t0 / nf + coeff_trace[idx])
                }
                _ => None,
            }
        } else {
            None
        };
        let bound = if s > T::zero() {
            riccati_bound(n, k_min, s).ok()
        } else {
            None
        };
        samples.push(ThetaSample {
            s,
            theta: theta[idx],
            div_correction: div_x[idx],
            coeff_trace: coeff_trace[idx],
            residual,
            bound,
        });
    }
    Ok(RiccatiTrace {
        samples,
        k_min,
        det_floor,
        truncated_at,
    })
}

impl<T: Real> RiccatiTrace<T> {
    /// CSV dump `s,theta,bound,ric_plus_hessf_trace,residual` (blank fields
    /// where a value is unavailable).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,theta,bound,ric_plus_hessf_trace,residual\n");
        for smp in &self.samples {
            out.push_str(&fmt_g17(smp.s.as_f64()));
            for v in [smp.theta, smp.bound, Some(smp.coeff_trace), smp.residual] {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&fmt_g17(v.as_f64()));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Worst Frobenius residual of the matrix Riccati identity
/// `Λ̇ + Λ² + R + ∇²f = 0` over samples with `s ≥ s_min`, with `Λ̇` obtained
/// by five-point central differences of the sampled `Λ`.
pub fn matrix_riccati_residual<T: Real>(
    frame: &JacobiFrame<T>,
    det_floor: T,
    s_min: T,
) -> Option<T> {
    let len = frame.len();
    if len < 5 {
        return None;
    }
    let h = frame.times[1] - frame.times[0];
    let lambdas: Vec<Option<DMatrix<T>>> =
        (0..len).map(|i| lambda_at(frame, i, det_floor)).collect();
    let mut worst: Option<T> = None;
    for idx in 2..len - 2 {
        if frame.times[idx] < s_min {
            continue;
        }
        let (Some(m2), Some(m1), Some(l0), Some(p1), Some(p2)) = (
            lambdas[idx - 2].as_ref(),
            lambdas[idx - 1].as_ref(),
            lambdas[idx].as_ref(),
            lambdas[idx + 1].as_ref(),
            lambdas[idx + 2].as_ref(),
        ) else {
            continue;
        };
        let ldot = (m2 - m1 * T::of(8.0) + p1 * T::of(8.0) - p2) / (T::of(12.0) * h);
        let resid = ldot + l0 * l0 + &frame.coeff[idx];
        let norm = resid.iter().fold(T::zero(), |a, v| a + *v * *v).sqrt();
        worst = Some(worst.map_or(norm, |w: T| w.max(norm)));
    }
    worst
}

/// Worst violation of the trace inequality `tr(Λ²) ≥ tr²(Λ)/n` over valid
/// samples (nonnegative defect means the inequality held).
pub fn trace_inequality_defect<T: Real>(frame: &JacobiFrame<T>, det_floor: T) -> T {
    let n = T::of(frame.dim() as f64);
    let mut worst = T::of(f64::INFINITY);
    for idx in 0..frame.len() {
        if let Some(l) = lambda_at(frame, idx, det_floor) {
            let tr = l.trace();
            let tr_sq = (&l * &l).trace();
            worst = worst.min(tr_sq - tr * tr / n);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::{conformal_metric, trig_field};
    use crate::dynamics::PhaseState;
    use crate::geometry::{ChartPoint, ClosedOneForm, MetricField, ScalarField};
    use crate::variation::{propagate_jacobi_frame, propagate_jacobi_frame_synthetic};
    use nalgebra::DVector;

    #[test]
    fn comparison_function_cases() {
        // k = 0 branch is the identity.
        assert_eq!(comparison_function(2, 0.0, 0.73).unwrap(), 0.73);
        // n = 2, k = −2: √(−n/k) = 1, argument s → sinh(1).
        let v = comparison_function(2, -2.0, 1.0).unwrap();
        assert!((v - 1.0f64.sinh()).abs() < 1e-15);
        assert!((v - 1.1752011936438014).abs() < 1e-12);
        // n = 2, k = 2: maximum of the sine branch at s = π/2 is √(n/k) = 1.
        let v = comparison_function(2, 2.0, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        // Domain error beyond the sine zero.
        assert!(comparison_function(2, 2.0, 3.2).is_err());
    }

    #[test]
    fn riccati_bound_cases() {
        assert!((riccati_bound(2, 0.0f64, 0.5).unwrap() - 4.0).abs() < 1e-15);
        // n = 2, k = −2: 2·coth(1); frozen from direct evaluation.
        let v = riccati_bound(2, -2.0, 1.0).unwrap();
        assert!((v - 2.0 / 1.0f64.tanh()).abs() < 1e-14);
        assert!((v - 2.6260705709986607).abs() < 1e-12);
        // coth asymptotics: bound → √(−nk) = 2 as s → ∞.
        let far: f64 = riccati_bound(2, -2.0, 10.0).unwrap();
        assert!((far - 2.0).abs() < 1e-8, "{far}");
    }

    #[test]
    fn comparison_equality_case_is_exact() {
        let rep = verify_comparison(2, 0.0, 1e-4, 2.0 / 1e-4, 20.0, &|_: f64| 0.0).unwrap();
        assert!(rep.blow_down_at.is_none());
        let worst = rep
            .samples
            .iter()
            .map(|(s, a, _)| (a - 2.0 / s).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-8, "worst deviation from n/s: {worst:.3e}");
        assert!(rep.max_violation <= 1e-8);
    }

    #[test]
    fn comparison_with_slack_stays_below_bound() {
        let rep = verify_comparison(2, -1.0, 1e-4, 2.0 / 1e-4, 5.0, &|_: f64| 0.5).unwrap();
        assert!(rep.max_violation <= 1e-6, "{:.3e}", rep.max_violation);
        assert!(rep.min_margin >= -1e-9);
    }

    #[test]
    fn comparison_converges_to_equilibrium() {
        let rep = verify_comparison(2, -1.0, 1e-4, 2.0 / 1e-4, 20.0, &|_: f64| 0.0).unwrap();
        // Riccati flow settles on √(−nk) = √2.
        assert!((rep.final_alpha - 2.0f64.sqrt()).abs() <= 1e-6, "{}", rep.final_alpha);
    }

    #[test]
    fn flat_theta_is_n_over_s() {
        let spec = LagrangianSpec::kinetic(MetricField::<f64>::flat(2));
        let traj = spec
            .integrate_flow(
                &PhaseState::new(ChartPoint::origin(2), DVector::from_row_slice(&[0.3, 0.1])),
                2.0,
                1e-3,
            )
            .unwrap();
        let frame = propagate_jacobi_frame(&spec, &traj).unwrap();
        let trace = theta_along(&spec, &frame, 1e-12).unwrap();
        let at = |s: f64| {
            trace
                .samples
                .iter()
                .min_by(|a, b| (a.s - s).abs().partial_cmp(&(b.s - s).abs()).unwrap())
                .unwrap()
                .theta
                .unwrap()
        };
        assert!((at(2.0) - 1.0).abs() < 1e-9);
        assert!((at(0.5) - 4.0).abs() < 1e-8);
        // s·Θ(s) → n near 0.
        let near = at(0.01);
        assert!((0.01 * near - 2.0).abs() <= 1e-3);
    }

    #[test]
    fn constant_form_does_not_shift_theta() {
        let spec = LagrangianSpec::<f64>::new(
            MetricField::flat(2),
            ScalarField::zero(),
            ClosedOneForm::constant(DVector::from_row_slice(&[0.3, 0.4])),
            0.0,
        );
        let traj = spec
            .integrate_flow(
                &PhaseState::new(ChartPoint::origin(2), DVector::from_row_slice(&[0.3, 0.4])),
                2.0,
                1e-3,
            )
            .unwrap();
        let frame = propagate_jacobi_frame(&spec, &traj).unwrap();
        let trace = theta_along(&spec, &frame, 1e-12).unwrap();
        let last = trace.samples.last().unwrap();
        assert!((last.theta.unwrap() - 1.0).abs() < 1e-9);
        assert!(last.div_correction.abs() < 1e-10);
    }

    #[test]
    fn matrix_riccati_residual_small_on_curved_metric() {
        let spec = LagrangianSpec::new(
            conformal_metric(2, 0.1, 0),
            trig_field(2, 0.03, 1, 1, true),
            ClosedOneForm::zero(2),
            0.0,
        );
        let traj = spec
            .integrate_flow(
                &PhaseState::new(
                    ChartPoint::from_slice(&[0.21, 0.67]),
                    DVector::from_row_slice(&[0.5, -0.35]),
                ),
                2.0,
                1e-3,
            )
            .unwrap();
        let frame = propagate_jacobi_frame(&spec, &traj).unwrap();
        let resid = matrix_riccati_residual(&frame, 1e-12, 0.5).unwrap();
        assert!(resid <= 1e-6, "residual = {resid:.3e}");
        let defect = trace_inequality_defect(&frame, 1e-12);
        assert!(defect >= -1e-12, "trace inequality defect = {defect:.3e}");
    }

    #[test]
    fn theta_bounded_by_n_over_s_under_nonnegative_hypothesis() {
        // Synthetic positive curvature: Θ = 2·cot(s) ≤ 2/s.
        let frame =
            propagate_jacobi_frame_synthetic(2, |_: f64| DMatrix::identity(2, 2), 1.5, 1e-3);
        let spec = LagrangianSpec::kinetic(MetricField::<f64>::flat(2));
        let trace = theta_along(&spec, &frame, 1e-12).unwrap();
        for smp in trace.samples.iter().filter(|s| s.s > 0.0) {
            if let Some(theta) = smp.theta {
                assert!(theta <= 2.0 / smp.s + 1e-3, "s = {}, theta = {theta}", smp.s);
            }
        }
    }

    #[test]
    fn mechanical_theta_meets_comparison_bound() {
        // Frame propagation vs the k = min Δf bound along a minimizing orbit.
        let eps = 0.05;
        let spec = LagrangianSpec::new(
            MetricField::flat(2),
            trig_field(2, eps, 0, 1, true),
            ClosedOneForm::zero(2),
            0.0,
        );
        let traj = spec
            .integrate_flow(
                &PhaseState::new(
                    ChartPoint::from_slice(&[0.5, 0.5]),
                    DVector::from_row_slice(&[0.45, 0.0]),
                ),
                6.0,
                1e-3,
            )
            .unwrap();
        let frame = propagate_jacobi_frame(&spec, &traj).unwrap();
        let trace = theta_along(&spec, &frame, 1e-12).unwrap();
        let k = -4.0 * std::f64::consts::PI.powi(2) * eps;
        assert!(trace.k_min >= k - 1e-9);
        for smp in trace.samples.iter().filter(|s| s.s > 0.0) {
            if let Some(theta) = smp.theta {
                let bound = riccati_bound(2, k, smp.s).unwrap();
                assert!(theta <= bound + 1e-3, "s = {}: {theta} vs {bound}", smp.s);
            }
        }
    }

    #[test]
    fn residual_column_nonpositive_up_to_noise() {
        let spec = LagrangianSpec::new(
            conformal_metric(2, 0.05, 0),
            trig_field(2, 0.02, 0, 1, true),
            ClosedOneForm::zero(2),
            0.0,
        );
        let traj = spec
            .integrate_flow(
                &PhaseState::new(
                    ChartPoint::from_slice(&[0.4, 0.15]),
                    DVector::from_row_slice(&[0.3, 0.25]),
                ),
                3.0,
                1e-3,
            )
            .unwrap();
        let frame = propagate_jacobi_frame(&spec, &traj).unwrap();
        let trace = theta_along(&spec, &frame, 1e-12).unwrap();
        for smp in &trace.samples {
            if let (Some(r), true) = (smp.residual, smp.s > 0.3) {
                assert!(r <= 1e-4, "s = {}: residual {r:.3e}", smp.s);
            }
        }
        let csv = trace.to_csv();
        assert!(csv.starts_with("s,theta,bound,ric_plus_hessf_trace,residual\n"));
    }
}
