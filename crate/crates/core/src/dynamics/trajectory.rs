use crate::dynamics::spec::{LagrangianSpec, PhaseState};
use crate::geometry::ChartPoint;
use crate::io::fmt_g17;
use crate::scalar::Real;

/// Time-sampled phase curve from the Euler-Lagrange flow, uniform step `dt`,
/// strictly increasing sample times.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    samples: Vec<(T, PhaseState<T>)>,
    dt: T,
}

impl<T: Real> Trajectory<T> {
    pub fn new(samples: Vec<(T, PhaseState<T>)>, dt: T) -> Self {
        debug_assert!(samples.windows(2).all(|w| w[0].0 < w[1].0));
        Self { samples, dt }
    }

    pub fn samples(&self) -> &[(T, PhaseState<T>)] {
        &self.samples
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start_time(&self) -> T {
        self.samples.first().expect("empty trajectory").0
    }

    pub fn end_time(&self) -> T {
        self.samples.last().expect("empty trajectory").0
    }

    pub fn duration(&self) -> T {
        self.end_time() - self.start_time()
    }

    pub fn state_at_index(&self, i: usize) -> &PhaseState<T> {
        &self.samples[i].1
    }

    /// Time-reversed curve: positions traversed backwards with negated
    /// velocities, re-timed to start at 0. An extremal of `L` maps to an
    /// extremal of the reverse Lagrangian `L̆`.
    pub fn reversed(&self) -> Self {
        let t_end = self.end_time();
        let mut samples: Vec<(T, PhaseState<T>)> = self
            .samples
            .iter()
            .rev()
            .map(|(t, s)| {
                (
                    t_end - *t,
                    PhaseState::new(s.x.clone(), -&s.v),
                )
            })
            .collect();
        samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Self::new(samples, self.dt)
    }

    /// Cubic Hermite interpolation of position and velocity at time `t`
    /// (clamped to the sampled range). Positions interpolate the minimal
    /// periodic lift of each interval.
    pub fn interpolate(&self, t: T) -> PhaseState<T> {
        let t0 = self.start_time();
        let n = self.samples.len();
        let h = self.dt;
        let raw = ((t - t0) / h).floor().as_f64() as isize;
        let i = raw.clamp(0, n as isize - 2) as usize;
        let (ta, sa) = &self.samples[i];
        let (_, sb) = &self.samples[i + 1];
        let s = (t - *ta) / h;
        let d = sa.x.displacement_to(&sb.x);
        let one = T::one();
        let two = T::of(2.0);
        let three = T::of(3.0);
        // Hermite basis on [0, 1] with slopes scaled by h.
        let h00 = (one + two * s) * (one - s) * (one - s);
        let h10 = s * (one - s) * (one - s);
        let h01 = s * s * (three - two * s);
        let h11 = s * s * (s - one);
        let pos = sa.x.coords() * h00
            + (&sa.v * (h10 * h))
            + (sa.x.coords() + &d) * h01
            + (&sb.v * (h11 * h));
        // Derivatives of the basis.
        let d00 = T::of(6.0) * s * (s - one) / h;
        let d10 = (one - s) * (one - three * s) / h * h;
        let d01 = -T::of(6.0) * s * (s - one) / h;
        let d11 = s * (three * s - two) / h * h;
        let vel = sa.x.coords() * d00
            + (&sa.v * d10)
            + (sa.x.coords() + &d) * d01
            + (&sb.v * d11);
        PhaseState::new(ChartPoint::new(pos), vel)
    }

    /// Maximum relative energy drift `|H(t) − H(t₀)| / (1 + |H(t₀)|)`.
    pub fn energy_drift(&self, spec: &LagrangianSpec<T>) -> T {
        let e0 = spec.energy(&self.samples[0].1);
        let mut worst = T::zero();
        for (_, s) in &self.samples {
            worst = worst.max((spec.energy(s) - e0).abs());
        }
        worst / (T::one() + e0.abs())
    }

    /// CSV dump `t,x1..xn,v1..vn` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let n = self.samples.first().map(|(_, s)| s.x.dim()).unwrap_or(0);
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",x{i}"));
        }
        for i in 1..=n {
            out.push_str(&format!(",v{i}"));
        }
        out.push('\n');
        for (t, s) in &self.samples {
            out.push_str(&fmt_g17(t.as_f64()));
            for i in 0..n {
                out.push(',');
                out.push_str(&fmt_g17(s.x.coord(i).as_f64()));
            }
            for i in 0..n {
                out.push(',');
                out.push_str(&fmt_g17(s.v[i].as_f64()));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MetricField;
    use nalgebra::DVector;

    #[test]
    fn interpolation_reproduces_straight_lines() {
        let spec = LagrangianSpec::kinetic(MetricField::<f64>::flat(2));
        let state = PhaseState::new(
            ChartPoint::from_slice(&[0.95, 0.1]),
            DVector::from_row_slice(&[0.4, -0.2]),
        );
        let traj = spec.integrate_flow(&state, 1.0, 0.01).unwrap();
        for &t in &[0.005, 0.337, 0.5, 0.991] {
            let s = traj.interpolate(t);
            let expect = ChartPoint::from_slice(&[0.95 + 0.4 * t, 0.1 - 0.2 * t]);
            assert!(s.x.chart_distance(&expect) < 1e-12, "t = {t}");
            assert!((s.v[0] - 0.4).abs() < 1e-10 && (s.v[1] + 0.2).abs() < 1e-10);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let spec = LagrangianSpec::kinetic(MetricField::<f64>::flat(2));
        let state = PhaseState::new(ChartPoint::origin(2), DVector::from_row_slice(&[0.1, 0.0]));
        let traj = spec.integrate_flow(&state, 0.01, 0.01).unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x1,x2,v1,v2");
        assert_eq!(lines.count(), 2);
    }
}
