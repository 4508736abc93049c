use nalgebra::DVector;

use crate::scalar::Real;

/// One classical fourth-order Runge-Kutta step for `y' = f(t, y)` on a flat
/// state vector. `h` may be negative for backward integration.
pub fn rk4_step<T: Real>(
    f: &dyn Fn(T, &DVector<T>) -> DVector<T>,
    t: T,
    y: &DVector<T>,
    h: T,
) -> DVector<T> {
    let half = T::of(0.5);
    let sixth = T::of(1.0 / 6.0);
    let two = T::of(2.0);
    let k1 = f(t, y);
    let k2 = f(t + half * h, &(y + &k1 * (half * h)));
    let k3 = f(t + half * h, &(y + &k2 * (half * h)));
    let k4 = f(t + h, &(y + &k3 * h));
    y + (k1 + k2 * two + k3 * two + k4) * (sixth * h)
}
