use nalgebra::DVector;

use crate::error::{Error, Result};

/// One classical fourth-order Runge–Kutta step of `x' = f(t, x)`.
pub fn rk4_step<F>(f: F, t: f64, x: &DVector<f64>, dt: f64) -> Result<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("rk4 step size must be positive, got {dt}")));
    }
    let h2 = 0.5 * dt;
    let k1 = f(t, x);
    let k2 = f(t + h2, &(x + &k1 * h2));
    let k3 = f(t + h2, &(x + &k2 * h2));
    let k4 = f(t + dt, &(x + &k3 * dt));
    let next = x + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0);
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow("rk4_step"));
    }
    Ok(next)
}
