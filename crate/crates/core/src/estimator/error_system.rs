//! Integral linear error system `𝓕(t) = 𝓖(t) θ` built from position and
//! input logs only.
//!
//! With `𝓙p(t) = ∫_{t−T₂}^{t} p` and `𝓘p(t) = ∫_{t−T₂}^{t} ∫_{σ−T₁}^{σ} p`,
//!
//! - `𝓕(t) = p(t−T₂−T₁) − p(t−T₁) + p(t) − p(t−T₂)`,
//! - `𝓖(t) = [(F ⊗ 1)ᵀ, (G ⊗ 1)ᵀ, (U ⊗ 1)ᵀ]` with `F = 𝓘p`,
//!   `G = 𝓙p(t) − 𝓙p(t−T₁)`, `U = 𝓘u`,
//!
//! and both vanish for `t < T₁ + T₂`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::SampledSignal;

/// Number of whole sample periods in `span`; errors when `span` is off-grid.
pub fn grid_steps(span: f64, dt: f64, field: &str) -> Result<usize> {
    let k = span / dt;
    if !(k >= 0.0) || (k - k.round()).abs() > 1e-6 {
        return Err(Error::config(field, format!("{span} s is not a whole multiple of the sample period {dt} s")));
    }
    Ok(k.round() as usize)
}

fn active(t: f64, t1: f64, t2: f64, dt: f64) -> bool {
    t >= t1 + t2 - 1e-6 * dt
}

fn check_retention(log: &SampledSignal, t1: f64, t2: f64) -> Result<()> {
    if log.retention() + 1e-6 * log.dt() < t1 + t2 {
        return Err(Error::config(
            "log retention",
            format!("{} s is shorter than T1 + T2 = {} s", log.retention(), t1 + t2),
        ));
    }
    Ok(())
}

pub fn script_f(p_log: &SampledSignal, t: f64, t1: f64, t2: f64) -> Result<DVector<f64>> {
    check_retention(p_log, t1, t2)?;
    if !active(t, t1, t2, p_log.dt()) {
        return Ok(DVector::zeros(p_log.dim()));
    }
    Ok(p_log.at(t - t2 - t1)? - p_log.at(t - t1)? + p_log.at(t)? - p_log.at(t - t2)?)
}

/// `(𝓘s(t), 𝓙s(t) − 𝓙s(t−T₁))` for a logged signal, via a running
/// cumulative integral over `[t − T₁ − T₂, t]`.
///
/// Every window integral is a trapezoid sum with the Euler–Maclaurin
/// endpoint correction `−dt²/12 (f′(b) − f′(a))`, which makes the rule
/// fourth order on smooth data. For the inner integral the derivative is
/// exact (`s(σ) − s(σ − T₁)`); for the signal itself it is taken from
/// second-order finite differences.
fn double_and_difference_integrals(
    log: &SampledSignal,
    t: f64,
    t1: f64,
    t2: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let dt = log.dt();
    let k1 = grid_steps(t1, dt, "T1")?;
    let k2 = grid_steps(t2, dt, "T2")?;
    let start = log.index_of(t - t1 - t2)?;
    let end = log.index_of(t)?;
    debug_assert_eq!(end - start, k1 + k2);
    let s: Vec<&DVector<f64>> = (start..=end).map(|k| log.get(k).expect("in window")).collect();
    let last = s.len() - 1;
    let c = dt * dt / 12.0;

    // first derivative of the samples
    let deriv = |k: usize| -> DVector<f64> {
        if last < 2 {
            (s[last] - s[0]) / (last as f64 * dt)
        } else if k == 0 {
            (s[1] * 4.0 - s[0] * 3.0 - s[2]) / (2.0 * dt)
        } else if k == last {
            (s[last] * 3.0 - s[last - 1] * 4.0 + s[last - 2]) / (2.0 * dt)
        } else {
            (s[k + 1] - s[k - 1]) / (2.0 * dt)
        }
    };
    let d: Vec<DVector<f64>> = (0..=last).map(deriv).collect();

    // corrected cumulative integral C_k = ∫_{t−T₁−T₂}^{t_k} s
    let mut cum = Vec::with_capacity(last + 1);
    cum.push(DVector::zeros(log.dim()));
    let mut trap = DVector::zeros(log.dim());
    for k in 0..last {
        trap += (s[k] + s[k + 1]) * (0.5 * dt);
        cum.push(&trap - (&d[k + 1] - &d[0]) * c);
    }
    // inner window integral at each σ_k ∈ [t−T₂, t]
    let inner: Vec<DVector<f64>> = (k1..=last).map(|k| &cum[k] - &cum[k - k1]).collect();
    let mut outer = DVector::zeros(log.dim());
    for w in inner.windows(2) {
        outer += (&w[0] + &w[1]) * (0.5 * dt);
    }
    let inner_rate = |k: usize| s[k] - s[k - k1];
    outer -= (inner_rate(last) - inner_rate(k1)) * c;
    let diff = (&cum[last] - &cum[k1]) - (&cum[k2] - &cum[0]);
    Ok((outer, diff))
}

/// Places `(v ⊗ 1_n)ᵀ` into `out` starting at column `col`.
fn kron_block(out: &mut DMatrix<f64>, col: usize, v: &DVector<f64>) {
    let n = out.nrows();
    for (j, vj) in v.iter().enumerate() {
        for i in 0..n {
            out[(i, col + j * n + i)] = *vj;
        }
    }
}

pub fn script_g(p_log: &SampledSignal, u_log: &SampledSignal, t: f64, t1: f64, t2: f64) -> Result<DMatrix<f64>> {
    check_retention(p_log, t1, t2)?;
    check_retention(u_log, t1, t2)?;
    let n = p_log.dim();
    let m = u_log.dim();
    let mut g = DMatrix::zeros(n, 2 * n * n + m * n);
    if !active(t, t1, t2, p_log.dt()) {
        return Ok(g);
    }
    let (f_int, g_int) = double_and_difference_integrals(p_log, t, t1, t2)?;
    let (u_int, _) = double_and_difference_integrals(u_log, t, t1, t2)?;
    kron_block(&mut g, 0, &f_int);
    kron_block(&mut g, n * n, &g_int);
    kron_block(&mut g, 2 * n * n, &u_int);
    Ok(g)
}
