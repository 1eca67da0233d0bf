//! Velocity-free adaptive observer with concurrent-learning parameter
//! updates.
//!
//! The observer is `p̂̇ = q̂`, `q̂̇ = Â₁p + Â₂q + B̂u + ν` with feedback
//! `ν = p̃ − (k + α + β) η`, where `η` is a dynamic filter state. Neither
//! `q̂` nor `η` is integrated from its derivative (both need `q`); they
//! come from their integral forms
//!
//! ```text
//! q̂(t) = ∫₀ᵗ [B̂u + ν + (Â₁ − Â₂̇) p] + Â₂(t) p(t) − Â₂(0) p(0)
//! η(t) = −∫₀ᵗ [(β + k) η + kα p̃] − (k + α) p̃(t)
//! ```
//!
//! which only involve measured `p` and `u`. The integrals are accumulated
//! with the trapezoid rule on the sampling grid, and the coupled update of
//! `(p̂, q̂, η)` at each new sample is solved implicitly in closed form.

use nalgebra::{DMatrix, DVector};

use super::stack::ParamHistoryStack;
use super::theta::ThetaVector;
use super::EstimatorGains;
use crate::error::{Error, Result};
use crate::numerics::rk4_step;

/// Snapshot of the observer between steps.
#[derive(Debug, Clone)]
pub struct ObserverState {
    pub t: f64,
    pub p_hat: DVector<f64>,
    pub q_hat: DVector<f64>,
    pub eta: DVector<f64>,
    pub theta_hat: ThetaVector,
    /// Least-squares gain `Γ`.
    pub gamma: DMatrix<f64>,
    /// Latest `θ̂̇`; supplies `Â₂̇` to the velocity estimate.
    pub theta_hat_rate: DVector<f64>,
    /// `p − p̂` at the latest sample.
    pub p_tilde: DVector<f64>,
    /// Feedback term at the latest sample.
    pub nu: DVector<f64>,
}

impl ObserverState {
    /// `x̂ = [p̂; q̂]`.
    pub fn x_hat(&self) -> DVector<f64> {
        let n = self.p_hat.len();
        let mut x = DVector::zeros(2 * n);
        x.rows_mut(0, n).copy_from(&self.p_hat);
        x.rows_mut(n, n).copy_from(&self.q_hat);
        x
    }
}

#[derive(Debug, Clone)]
pub struct AdaptiveObserver {
    gains: EstimatorGains,
    state: ObserverState,
    q_integral: DVector<f64>,
    q_integrand: DVector<f64>,
    eta_integral: DVector<f64>,
    eta_integrand: DVector<f64>,
    a2_p0: DVector<f64>,
}

impl AdaptiveObserver {
    /// Starts at `p̂(0) = p(0)`, `q̂(0) = 0`, `η(0) = 0`.
    pub fn new(
        t0: f64,
        p0: &DVector<f64>,
        u0: &DVector<f64>,
        theta0: ThetaVector,
        gamma0: DMatrix<f64>,
        gains: EstimatorGains,
    ) -> Result<Self> {
        let n = p0.len();
        let d = theta0.as_vector().len();
        if theta0.n() != n || theta0.m() != u0.len() {
            return Err(Error::dims(
                "AdaptiveObserver::new",
                format!("n = {n}, m = {}", u0.len()),
                format!("n = {}, m = {}", theta0.n(), theta0.m()),
            ));
        }
        if gamma0.shape() != (d, d) {
            return Err(Error::dims("AdaptiveObserver::new", format!("{d}x{d}"), format!("{:?}", gamma0.shape())));
        }
        if gamma0.clone().cholesky().is_none() {
            return Err(Error::Domain("initial least-squares gain must be positive definite".into()));
        }
        gains.validate()?;
        let zeros = DVector::zeros(n);
        let a2_p0 = theta0.a2() * p0;
        let q_integrand = theta0.b() * u0 + theta0.a1() * p0;
        let state = ObserverState {
            t: t0,
            p_hat: p0.clone(),
            q_hat: zeros.clone(),
            eta: zeros.clone(),
            theta_hat: theta0,
            gamma: gamma0,
            theta_hat_rate: DVector::zeros(d),
            p_tilde: zeros.clone(),
            nu: zeros.clone(),
        };
        Ok(Self {
            gains,
            state,
            q_integral: zeros.clone(),
            q_integrand,
            eta_integral: zeros.clone(),
            eta_integrand: zeros,
            a2_p0,
        })
    }

    pub fn state(&self) -> &ObserverState {
        &self.state
    }

    pub fn gains(&self) -> &EstimatorGains {
        &self.gains
    }

    fn theta_rate(&self, theta: &DVector<f64>, gamma: &DMatrix<f64>, stack: &ParamHistoryStack) -> DVector<f64> {
        gamma * (stack.cross() - stack.gram() * theta) * self.gains.k_theta
    }

    /// Advances `θ̂` and `Γ` by one RK4 step of
    /// `θ̂̇ = k_θ Γ Σ𝓖ᵢᵀ(𝓕ᵢ − 𝓖ᵢθ̂)`, `Γ̇ = β₁Γ − k_θ Γ 𝒢 Γ`.
    ///
    /// Both are held while the stack is not full rank.
    pub fn update_theta(&mut self, stack: &ParamHistoryStack, dt: f64) -> Result<()> {
        let d = self.state.gamma.nrows();
        if stack.gram().nrows() != d {
            return Err(Error::dims("update_theta", d, stack.gram().nrows()));
        }
        if !stack.is_full_rank() {
            self.state.theta_hat_rate.fill(0.0);
            return Ok(());
        }
        let (k_theta, beta1) = (self.gains.k_theta, self.gains.beta1);
        let gram = stack.gram();
        let cross = stack.cross();

        let mut packed = DVector::zeros(d + d * d);
        packed.rows_mut(0, d).copy_from(self.state.theta_hat.as_vector());
        packed.rows_mut(d, d * d).copy_from_slice(self.state.gamma.as_slice());
        let field = |_t: f64, z: &DVector<f64>| {
            let theta = z.rows(0, d);
            let gamma = DMatrix::from_column_slice(d, d, &z.as_slice()[d..]);
            let theta_dot = &gamma * (cross - gram * theta) * k_theta;
            let gamma_dot = &gamma * beta1 - &gamma * gram * &gamma * k_theta;
            let mut out = DVector::zeros(d + d * d);
            out.rows_mut(0, d).copy_from(&theta_dot);
            out.rows_mut(d, d * d).copy_from_slice(gamma_dot.as_slice());
            out
        };
        let next = rk4_step(field, self.state.t, &packed, dt)?;
        let theta = next.rows(0, d).into_owned();
        let gamma = DMatrix::from_column_slice(d, d, &next.as_slice()[d..]);
        let gamma = (&gamma + gamma.transpose()) * 0.5;
        if gamma.clone().cholesky().is_none() {
            return Err(Error::GainNotPositiveDefinite { t: self.state.t + dt });
        }
        let (n, m) = (self.state.theta_hat.n(), self.state.theta_hat.m());
        self.state.theta_hat_rate = self.theta_rate(&theta, &gamma, stack);
        self.state.theta_hat = ThetaVector::from_vector(n, m, theta)?;
        self.state.gamma = gamma;
        Ok(())
    }

    /// Ingests the sample `(p, u)` taken `dt` after the previous one.
    pub fn step(&mut self, p: &DVector<f64>, u: &DVector<f64>, dt: f64) -> Result<()> {
        let g = &self.gains;
        let (k, alpha, beta) = (g.k, g.alpha, g.beta);
        let h = 0.5 * dt;
        let n = p.len();
        let th = &self.state.theta_hat;
        let a2_rate = DMatrix::from_column_slice(n, n, &self.state.theta_hat_rate.as_slice()[n * n..2 * n * n]);

        // η' = c_eta − d_eta p̃'
        let denom = 1.0 + h * (beta + k);
        let c_eta = -(&self.eta_integral + &self.eta_integrand * h) / denom;
        let d_eta = (h * k * alpha + k + alpha) / denom;
        let gsum = k + alpha + beta;
        let nu_slope = 1.0 + gsum * d_eta;

        // known part of q̂'
        let known_integrand = th.b() * u + (th.a1() - a2_rate) * p;
        let k_q = &self.q_integral + (&self.q_integrand + &known_integrand) * h + th.a2() * p - &self.a2_p0;

        let p_hat = (&self.state.p_hat + &self.state.q_hat * h + &k_q * h + p * (h * h * nu_slope)
            - &c_eta * (h * h * gsum))
            / (1.0 + h * h * nu_slope);
        let p_tilde = p - &p_hat;
        let eta = &c_eta - &p_tilde * d_eta;
        let nu = &p_tilde - &eta * gsum;
        let q_hat = &k_q + &nu * h;

        let q_integrand = known_integrand + &nu;
        let eta_integrand = &eta * (beta + k) + &p_tilde * (k * alpha);
        self.q_integral += (&self.q_integrand + &q_integrand) * h;
        self.eta_integral += (&self.eta_integrand + &eta_integrand) * h;
        self.q_integrand = q_integrand;
        self.eta_integrand = eta_integrand;

        if p_hat.iter().chain(q_hat.iter()).chain(eta.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow("observer_step"));
        }
        self.state.t += dt;
        self.state.p_hat = p_hat;
        self.state.q_hat = q_hat;
        self.state.eta = eta;
        self.state.p_tilde = p_tilde;
        self.state.nu = nu;
        Ok(())
    }
}
