//! Domain-free numerical kernels: fixed-step integration, quadrature over
//! sampled signals, Riccati and Lyapunov solves, least squares and
//! condition numbers.

mod integrate;
mod linalg;
mod riccati;
mod signal;

pub use integrate::rk4_step;
pub use linalg::{
    condition_number, controllability_matrix, is_hurwitz, kron_transpose_apply, least_squares, max_real_eigenvalue,
    numerical_rank, solve_lyapunov, symmetric_eigen_range,
};
pub use riccati::{are_residual, solve_are, stabilizing_gain, ARE_RESIDUAL_TOL};
pub use signal::SampledSignal;

/// Composite trapezoid rule of `signal` over `[a, b]`.
pub fn trapezoid(signal: &SampledSignal, a: f64, b: f64) -> crate::Result<nalgebra::DVector<f64>> {
    signal.trapezoid(a, b)
}
