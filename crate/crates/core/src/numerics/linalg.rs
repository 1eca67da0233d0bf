use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    a.clone().svd(false, false).singular_values
}

/// Numerical rank from the singular values, with the usual
/// `max(r, c) * eps * sigma_max` cutoff.
pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = singular_values(a);
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    let tol = rank_tolerance(a.nrows(), a.ncols(), smax);
    sv.iter().filter(|&&s| s > tol).count()
}

/// Ratio of the largest to the smallest singular value.
///
/// Returns `f64::INFINITY` when the matrix is numerically rank deficient
/// (fewer nonzero singular values than columns, or more columns than rows).
pub fn condition_number(a: &DMatrix<f64>) -> Result<f64> {
    if a.is_empty() || a.iter().all(|&v| v == 0.0) {
        return Err(Error::Domain("condition number of a zero matrix".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow("condition_number"));
    }
    let sv = singular_values(a);
    let smax = sv.max();
    let smin = sv.min();
    if sv.len() < a.ncols() || smin <= rank_tolerance(a.nrows(), a.ncols(), smax) {
        return Ok(f64::INFINITY);
    }
    Ok(smax / smin)
}

/// Minimizes `||a w - b||_2` through a Householder QR of `a`.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let (rows, cols) = a.shape();
    if b.len() != rows {
        return Err(Error::dims("least_squares", rows, b.len()));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow("least_squares input"));
    }
    let rank = numerical_rank(a);
    if rank < cols {
        return Err(Error::RankDeficient { rank, required: cols });
    }
    let qr = a.clone().qr();
    let mut qtb = b.clone();
    qr.q_tr_mul(&mut qtb);
    let r = qr.r();
    let rhs = qtb.rows(0, cols).into_owned();
    let w = r.solve_upper_triangular(&rhs).ok_or(Error::RankDeficient { rank, required: cols })?;
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow("least_squares"));
    }
    Ok(w)
}

/// Computes `(v ⊗ 1_n)^T vec(M)`, which equals `M v` for the `n × a` matrix
/// whose column-major vectorization is `mvec`.
pub fn kron_transpose_apply(v: &DVector<f64>, mvec: &[f64]) -> Result<DVector<f64>> {
    let a = v.len();
    if a == 0 || !mvec.len().is_multiple_of(a) {
        return Err(Error::dims("kron_transpose_apply", format!("a multiple of {a}"), mvec.len()));
    }
    let n = mvec.len() / a;
    let mut out = DVector::zeros(n);
    for (j, vj) in v.iter().enumerate() {
        for i in 0..n {
            out[i] += vj * mvec[j * n + i];
        }
    }
    Ok(out)
}

/// Solves `a^T x + x a + q = 0` by vectorization.
///
/// Intended for the small systems this crate handles (dimension ≤ 20).
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() || q.shape() != (n, n) {
        return Err(Error::dims("solve_lyapunov", format!("{n}x{n}"), format!("{:?}", q.shape())));
    }
    let at = a.transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    // vec(A^T X) = (I ⊗ A^T) vec X, vec(X A) = (A^T ⊗ I) vec X
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -DVector::from_column_slice(q.as_slice());
    let sol = op.lu().solve(&rhs).ok_or_else(|| Error::SolverFailure {
        solver: "lyapunov",
        iterations: 0,
        residual: f64::NAN,
        reason: "singular Lyapunov operator (eigenvalues of a sum to zero)".into(),
    })?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&x + x.transpose()) * 0.5)
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn symmetric_eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let ev = m.clone().symmetric_eigenvalues();
    (ev.min(), ev.max())
}

pub fn max_real_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone().complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    max_real_eigenvalue(a) < 0.0
}

/// `[b, a b, a^2 b, ...]` with `a.nrows()` blocks.
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut c = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        c.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    c
}
