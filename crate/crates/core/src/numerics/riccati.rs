//! Continuous-time algebraic Riccati equation
//!
//! `aᵀ p + p a − p b r⁻¹ bᵀ p + q = 0`
//!
//! solved by Kleinman–Newton iteration: starting from a stabilizing gain
//! `k₀`, repeatedly solve the Lyapunov equation of the closed loop
//! `a − b kᵢ` and set `kᵢ₊₁ = r⁻¹ bᵀ pᵢ`. Each iterate stays stabilizing and
//! the sequence converges quadratically to the stabilizing solution.

use nalgebra::DMatrix;

use super::linalg::{is_hurwitz, solve_lyapunov};
use crate::error::{Error, Result};

const MAX_ITER: usize = 100;
/// Absolute Frobenius bound on the Riccati residual of an accepted solution.
pub const ARE_RESIDUAL_TOL: f64 = 1e-8;

/// Frobenius norm of `aᵀ p + p a − p b r⁻¹ bᵀ p + q`.
pub fn are_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    let r_inv = r.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(r.nrows(), r.ncols(), f64::NAN));
    let res = a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q;
    res.norm()
}

/// Initial stabilizing gain.
///
/// For the second-order structure `a = [[0, I], [a₁, a₂]]`, `b = [0; b₂]`
/// with `b₂` of full row rank, the gain places every closed-loop pole at
/// −1 (`q̇ = −p − 2q`). Otherwise a Hurwitz `a` takes the zero gain and
/// anything else falls back to Bass's method.
pub fn stabilizing_gain(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = a.nrows();
    let m = b.ncols();
    if let Some(k) = second_order_pole_placement(a, b) {
        if is_hurwitz(&(a - b * &k)) {
            return Ok(k);
        }
    }
    if is_hurwitz(a) {
        return Ok(DMatrix::zeros(m, dim));
    }
    bass_gain(a, b)
}

fn second_order_pole_placement(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let dim = a.nrows();
    if !dim.is_multiple_of(2) {
        return None;
    }
    let n = dim / 2;
    let m = b.ncols();
    let eye = DMatrix::<f64>::identity(n, n);
    let top_left = a.view((0, 0), (n, n));
    let top_right = a.view((0, n), (n, n));
    let b_top = b.view((0, 0), (n, m));
    if top_left.amax() != 0.0 || (top_right - &eye).amax() != 0.0 || b_top.amax() != 0.0 {
        return None;
    }
    let b2 = b.view((n, 0), (n, m)).into_owned();
    let gram = &b2 * b2.transpose();
    let right_inv = b2.transpose() * gram.try_inverse()?;
    let (omega, zeta) = (1.0, 1.0);
    let mut target = a.view((n, 0), (n, dim)).into_owned();
    for i in 0..n {
        target[(i, i)] += omega * omega;
        target[(i, n + i)] += 2.0 * zeta * omega;
    }
    Some(right_inv * target)
}

fn bass_gain(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = a.nrows();
    let shift = a.norm() + 1.0;
    let shifted = -(a + DMatrix::<f64>::identity(dim, dim) * shift);
    // shifted · w + w · shiftedᵀ + 2 b bᵀ = 0
    let w = solve_lyapunov(&shifted.transpose(), &(b * b.transpose() * 2.0))?;
    let w_inv = w.try_inverse().ok_or_else(|| Error::SolverFailure {
        solver: "bass",
        iterations: 0,
        residual: f64::NAN,
        reason: "controllability Gramian is singular; pair not controllable".into(),
    })?;
    Ok(b.transpose() * w_inv)
}

/// Stabilizing solution of the continuous-time ARE.
pub fn solve_are(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = a.nrows();
    let m = b.ncols();
    if !a.is_square() || b.nrows() != dim {
        return Err(Error::dims(
            "solve_are",
            format!("{dim}x{dim} and {dim}xm"),
            format!("{:?}, {:?}", a.shape(), b.shape()),
        ));
    }
    if q.shape() != (dim, dim) || r.shape() != (m, m) {
        return Err(Error::dims(
            "solve_are",
            format!("q {dim}x{dim}, r {m}x{m}"),
            format!("q {:?}, r {:?}", q.shape(), r.shape()),
        ));
    }
    let failure = |iterations, residual, reason: &str| Error::SolverFailure {
        solver: "kleinman-newton",
        iterations,
        residual,
        reason: reason.to_string(),
    };
    let r_inv = r.clone().cholesky().ok_or_else(|| failure(0, f64::NAN, "r is not positive definite"))?.inverse();

    let mut k = stabilizing_gain(a, b)?;
    let mut p = DMatrix::zeros(dim, dim);
    let mut last_step = f64::INFINITY;
    let mut iterations = 0;
    for it in 1..=MAX_ITER {
        iterations = it;
        let closed = a - b * &k;
        if !is_hurwitz(&closed) {
            return Err(failure(it, f64::NAN, "iterate lost stability"));
        }
        let p_next = solve_lyapunov(&closed, &(q + k.transpose() * r * &k))?;
        let step = (&p_next - &p).norm();
        k = &r_inv * b.transpose() * &p_next;
        p = p_next;
        // quadratic convergence stalls at rounding level; stop once the
        // update no longer shrinks or is negligible
        if step <= 1e-14 * (1.0 + p.norm()) || (it > 3 && step >= last_step) {
            break;
        }
        last_step = step;
    }

    let asym = (&p - p.transpose()).norm();
    let p = (&p + p.transpose()) * 0.5;
    let residual = are_residual(a, b, q, r, &p);
    if !residual.is_finite() || residual >= ARE_RESIDUAL_TOL {
        return Err(failure(iterations, residual, "residual above tolerance"));
    }
    if asym > 1e-8 * (1.0 + p.norm()) {
        return Err(failure(iterations, residual, "iterate lost symmetry"));
    }
    if !is_hurwitz(&(a - b * &r_inv * b.transpose() * &p)) {
        return Err(failure(iterations, residual, "closed loop not Hurwitz"));
    }
    Ok(p)
}
