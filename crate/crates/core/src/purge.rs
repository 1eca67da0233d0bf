//! Estimate-quality indicators and the policy that decides when the IRL
//! weights are re-solved and when the IRL history stack is emptied.
//!
//! The composite quality is `η = η₁ + η₂`:
//!
//! - `η₁ = x̄ᵀS₁x̄` with `x̄ = [p̃(t); q̂(t−T) − v̄(t−T)]`, where `v̄` is a
//!   noncausal smoothed velocity. It measures the state estimate.
//! - `η₂ = ∫_{t−T}^{t} eᵀS₂e`, where `e` is the position prediction error
//!   of the estimated model rolled out from `[p(t−T); v̄(t−T)]` with the
//!   logged inputs. It measures the parameter estimate.
//!
//! Both vanish when the estimates are exact; `η` is infinite until enough
//! history exists.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{grid_steps, ObserverState, ThetaVector};
use crate::irl::{FeatureBasis, IrlHistoryStack, WeightVector};
use crate::numerics::{rk4_step, SampledSignal};

/// Horizon, weights and smoothing window of the quality indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityConfig {
    /// Horizon `T` in seconds.
    pub horizon: f64,
    pub s1: DMatrix<f64>,
    pub s2: DMatrix<f64>,
    /// Smoothing half-width `w` in samples.
    pub half_width: usize,
}

fn check_psd(name: &str, m: &DMatrix<f64>, dim: usize) -> Result<()> {
    if m.shape() != (dim, dim) {
        return Err(Error::config(name, format!("expected {dim}x{dim}, got {:?}", m.shape())));
    }
    if (m - m.transpose()).amax() > 1e-12 * (1.0 + m.amax()) {
        return Err(Error::config(name, "must be symmetric"));
    }
    if m.clone().symmetric_eigenvalues().min() < -1e-12 * (1.0 + m.amax()) {
        return Err(Error::config(name, "must be positive semidefinite"));
    }
    Ok(())
}

impl QualityConfig {
    /// Identity weights.
    pub fn with_identity(n: usize, horizon: f64, half_width: usize) -> Self {
        Self { horizon, s1: DMatrix::identity(2 * n, 2 * n), s2: DMatrix::identity(n, n), half_width }
    }

    pub fn validate(&self, n: usize, dt: f64) -> Result<()> {
        check_psd("S1", &self.s1, 2 * n)?;
        check_psd("S2", &self.s2, n)?;
        if self.half_width == 0 {
            return Err(Error::config("w", "smoothing half-width must be at least one sample"));
        }
        let steps = grid_steps(self.horizon, dt, "T")?;
        if steps < 2 * self.half_width + 1 {
            return Err(Error::config(
                "T",
                format!("horizon of {steps} samples is shorter than the smoothing window {}", 2 * self.half_width + 1),
            ));
        }
        Ok(())
    }
}

/// Derivative at `t` of the least-squares quadratic through the `2w + 1`
/// samples centered at `t` (Savitzky–Golay).
///
/// For a symmetric window the quadratic term drops out and the derivative
/// is `Σₖ k p(t + k dt) / (dt Σₖ k²)`.
pub fn smooth_velocity(p_log: &SampledSignal, t: f64, w: usize) -> Result<DVector<f64>> {
    if w == 0 {
        return Err(Error::config("w", "smoothing half-width must be at least one sample"));
    }
    let dt = p_log.dt();
    let center = p_log.index_of(t)?;
    let underflow = || Error::WindowUnderflow {
        requested: t,
        oldest: p_log.oldest_time().unwrap_or(f64::NAN),
        newest: p_log.newest_time().unwrap_or(f64::NAN),
    };
    if center < w || center + w >= p_log.len() {
        return Err(underflow());
    }
    let wf = w as f64;
    let denom = dt * wf * (wf + 1.0) * (2.0 * wf + 1.0) / 3.0;
    let mut v = DVector::zeros(p_log.dim());
    for k in 1..=w {
        let diff = p_log.get(center + k).ok_or_else(underflow)? - p_log.get(center - k).ok_or_else(underflow)?;
        v += diff * k as f64;
    }
    Ok(v / denom)
}

/// `x̄ᵀS₁x̄` with `x̄ = [p̃(t); q̂(t−T) − v̄]`.
pub fn quality_eta1(
    p_tilde: &DVector<f64>,
    q_hat_past: &DVector<f64>,
    smoothed_v: &DVector<f64>,
    s1: &DMatrix<f64>,
) -> Result<f64> {
    let n = p_tilde.len();
    if q_hat_past.len() != n || smoothed_v.len() != n || s1.shape() != (2 * n, 2 * n) {
        return Err(Error::dims("quality_eta1", 2 * n, s1.nrows()));
    }
    let mut x = DVector::zeros(2 * n);
    x.rows_mut(0, n).copy_from(p_tilde);
    x.rows_mut(n, n).copy_from(&(q_hat_past - smoothed_v));
    Ok(x.dot(&(s1 * &x)).max(0.0))
}

/// One RK4 step of `ẋ = A′x + B′u` with `u` linear between samples,
/// written as `x⁺ = Φx + Ψ₀u_k + Ψ₁u_{k+1}`.
fn rk4_propagators(a: &DMatrix<f64>, b: &DMatrix<f64>, dt: f64) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let (d, m) = (a.nrows(), b.ncols());
    let column = |x0: DVector<f64>, u0: DVector<f64>, u1: DVector<f64>| {
        let f = |s: f64, x: &DVector<f64>| a * x + b * (&u0 + (&u1 - &u0) * (s / dt));
        rk4_step(f, 0.0, &x0, dt)
    };
    let mut phi = DMatrix::zeros(d, d);
    for i in 0..d {
        let mut e = DVector::zeros(d);
        e[i] = 1.0;
        phi.set_column(i, &column(e, DVector::zeros(m), DVector::zeros(m))?);
    }
    let mut psi0 = DMatrix::zeros(d, m);
    let mut psi1 = DMatrix::zeros(d, m);
    for j in 0..m {
        let mut e = DVector::zeros(m);
        e[j] = 1.0;
        psi0.set_column(j, &column(DVector::zeros(d), e.clone(), DVector::zeros(m))?);
        psi1.set_column(j, &column(DVector::zeros(d), DVector::zeros(m), e)?);
    }
    Ok((phi, psi0, psi1))
}

/// Rollout prediction error `∫_{t−T}^{t} (p_sim − p)ᵀS₂(p_sim − p)` of the
/// estimated model, started from `[p(t−T); v̄(t−T)]`.
///
/// A diverging rollout yields `+∞`.
pub fn quality_eta2(
    p_log: &SampledSignal,
    u_log: &SampledSignal,
    theta_hat: &ThetaVector,
    t: f64,
    horizon: f64,
    s2: &DMatrix<f64>,
    half_width: usize,
) -> Result<f64> {
    let n = theta_hat.n();
    if p_log.dim() != n || u_log.dim() != theta_hat.m() || s2.shape() != (n, n) {
        return Err(Error::dims("quality_eta2", n, p_log.dim()));
    }
    let dt = p_log.dt();
    let steps = grid_steps(horizon, dt, "T")?;
    let start = t - horizon;
    let i0 = p_log.index_of(start)?;
    let j0 = u_log.index_of(start)?;
    let v0 = smooth_velocity(p_log, start, half_width)?;
    let (phi, psi0, psi1) = rk4_propagators(&theta_hat.a_prime(), &theta_hat.b_prime(), dt)?;

    let mut x = DVector::zeros(2 * n);
    x.rows_mut(0, n).copy_from(p_log.get(i0).expect("indexed"));
    x.rows_mut(n, n).copy_from(&v0);
    let cost = |x: &DVector<f64>, k: usize| {
        let e = x.rows(0, n) - p_log.get(i0 + k).expect("in window");
        e.dot(&(s2 * &e))
    };
    let mut prev = cost(&x, 0);
    let mut total = 0.0;
    for k in 0..steps {
        let uk = u_log.get(j0 + k).ok_or(Error::WindowUnderflow { requested: start, oldest: t, newest: t })?;
        let uk1 = u_log.get(j0 + k + 1).ok_or(Error::WindowUnderflow { requested: t, oldest: start, newest: t })?;
        x = &phi * &x + &psi0 * uk + &psi1 * uk1;
        if !(x.amax() < 1e150) {
            return Ok(f64::INFINITY);
        }
        let next = cost(&x, k + 1);
        total += 0.5 * dt * (prev + next);
        prev = next;
    }
    Ok(if total.is_finite() { total.max(0.0) } else { f64::INFINITY })
}

/// Logs needed for the quality indicators and their evaluation.
#[derive(Debug, Clone)]
pub struct QualityMonitor {
    config: QualityConfig,
    p_log: SampledSignal,
    u_log: SampledSignal,
    q_hat_log: SampledSignal,
}

impl QualityMonitor {
    pub fn new(config: QualityConfig, n: usize, m: usize, dt: f64) -> Result<Self> {
        config.validate(n, dt)?;
        let retention = config.horizon + (config.half_width as f64 + 1.0) * dt;
        Ok(Self {
            p_log: SampledSignal::new(dt, n, retention)?,
            u_log: SampledSignal::new(dt, m, retention)?,
            q_hat_log: SampledSignal::new(dt, n, retention)?,
            config,
        })
    }

    pub fn config(&self) -> &QualityConfig {
        &self.config
    }

    /// Logs the sample and the observer snapshot taken after ingesting it,
    /// then returns `(η₁, η₂)`, both infinite while the smoothing window
    /// around `t − T` is not yet covered.
    pub fn update(&mut self, t: f64, p: &DVector<f64>, u: &DVector<f64>, obs: &ObserverState) -> Result<(f64, f64)> {
        self.p_log.push(t, p.clone())?;
        self.u_log.push(t, u.clone())?;
        self.q_hat_log.push(t, obs.q_hat.clone())?;
        let c = &self.config;
        let dt = self.p_log.dt();
        let start = t - c.horizon;
        let oldest = self.p_log.oldest_time().unwrap_or(t);
        if start - c.half_width as f64 * dt < oldest - 1e-6 * dt {
            return Ok((f64::INFINITY, f64::INFINITY));
        }
        let v = smooth_velocity(&self.p_log, start, c.half_width)?;
        let q_past = self.q_hat_log.at(start)?;
        let eta1 = quality_eta1(&obs.p_tilde, &q_past, &v, &c.s1)?;
        let eta2 = quality_eta2(&self.p_log, &self.u_log, &obs.theta_hat, t, c.horizon, &c.s2, c.half_width)?;
        Ok((eta1, eta2))
    }
}

/// Thresholds and bookkeeping of the weight-update and purge policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurgeState {
    /// Number of purges so far.
    pub s: usize,
    pub kappa1_bar: f64,
    pub kappa2_bar: f64,
    /// Minimum quality stored in the stack.
    pub eta_bar: f64,
    pub w_current: WeightVector,
    /// Whether the latest data selection stored anything.
    pub varpi: bool,
}

/// What the policy did at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PolicyOutcome {
    pub solved: bool,
    pub purged: bool,
}

impl PurgeState {
    pub fn new(kappa1_bar: f64, kappa2_bar: f64, w0: WeightVector) -> Result<Self> {
        if !(kappa1_bar > 1.0) {
            return Err(Error::config("kappa1_bar", format!("must exceed 1, got {kappa1_bar}")));
        }
        if !(kappa2_bar > 1.0) {
            return Err(Error::config("kappa2_bar", format!("must exceed 1, got {kappa2_bar}")));
        }
        Ok(Self { s: 0, kappa1_bar, kappa2_bar, eta_bar: f64::INFINITY, w_current: w0, varpi: false })
    }
}

/// Re-solves the weights when the stack is full, `κ(Σ̂ᵀΣ̂) < κ̲₁` and new
/// data was stored, otherwise holds them; then empties the stack when `κ(Σ̂ᵀΣ̂) < κ̲₂` and
/// the current quality `eta_now` beats every stored quality.
///
/// The weights survive a purge.
pub fn purge_policy(
    ps: &mut PurgeState,
    stack: &mut IrlHistoryStack,
    basis: &FeatureBasis,
    eta_now: f64,
) -> Result<PolicyOutcome> {
    let mut out = PolicyOutcome::default();
    ps.eta_bar = stack.eta_bar();
    let kappa = stack.kappa_gram();
    let full = stack.is_full();
    if full && kappa < ps.kappa1_bar && ps.varpi {
        match stack.solve_weights(basis, ps.w_current.r1) {
            Ok(w) => {
                ps.w_current = w;
                out.solved = true;
            }
            Err(Error::RankDeficient { .. }) | Err(Error::Domain(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if kappa < ps.kappa2_bar && eta_now < ps.eta_bar {
        stack.clear();
        ps.s += 1;
        ps.eta_bar = stack.eta_bar();
        out.purged = true;
    }
    Ok(out)
}
