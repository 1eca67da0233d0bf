//! Simultaneous state and parameter estimation from position and input
//! measurements: the integral error system, the parameter history stack,
//! concurrent-learning update laws and the velocity-free observer.

mod error_system;
mod observer;
mod stack;
mod theta;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use error_system::{grid_steps, script_f, script_g};
pub use observer::{AdaptiveObserver, ObserverState};
pub use stack::ParamHistoryStack;
pub use theta::ThetaVector;

use crate::error::{Error, Result};
use crate::numerics::SampledSignal;
use crate::plant::Measurement;

/// Observer and update-law gains plus the error-system windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorGains {
    pub k_theta: f64,
    pub beta1: f64,
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
    pub t1: f64,
    pub t2: f64,
}

impl EstimatorGains {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("k_theta", self.k_theta),
            ("beta1", self.beta1),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("k", self.k),
            ("T1", self.t1),
            ("T2", self.t2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Both windows must be whole multiples of `dt`.
    pub fn check_grid(&self, dt: f64) -> Result<()> {
        grid_steps(self.t1, dt, "T1")?;
        grid_steps(self.t2, dt, "T2")?;
        Ok(())
    }
}

/// Logs `(p, u)` and records error-system pairs into a stack every
/// `interval` samples once `t ≥ T₁ + T₂`.
#[derive(Debug, Clone)]
pub struct StackRecorder {
    p_log: SampledSignal,
    u_log: SampledSignal,
    t1: f64,
    t2: f64,
    interval: usize,
    count: usize,
}

impl StackRecorder {
    pub fn new(n: usize, m: usize, dt: f64, t1: f64, t2: f64, interval: usize) -> Result<Self> {
        grid_steps(t1, dt, "T1")?;
        grid_steps(t2, dt, "T2")?;
        if interval == 0 {
            return Err(Error::config("record_interval", "must be at least one sample"));
        }
        let retention = t1 + t2 + dt;
        Ok(Self {
            p_log: SampledSignal::new(dt, n, retention)?,
            u_log: SampledSignal::new(dt, m, retention)?,
            t1,
            t2,
            interval,
            count: 0,
        })
    }

    /// Logs a sample; returns whether a pair was stored.
    pub fn push(&mut self, meas: &Measurement, stack: &mut ParamHistoryStack) -> Result<bool> {
        self.p_log.push(meas.t, meas.p.clone())?;
        self.u_log.push(meas.t, meas.u.clone())?;
        let due = self.count.is_multiple_of(self.interval);
        self.count += 1;
        if !due || meas.t < self.t1 + self.t2 - 1e-6 * self.p_log.dt() {
            return Ok(false);
        }
        let f = script_f(&self.p_log, meas.t, self.t1, self.t2)?;
        let g = script_g(&self.p_log, &self.u_log, meas.t, self.t1, self.t2)?;
        stack.maybe_record(f, g)
    }
}

/// Fills a parameter stack from a recorded measurement sequence.
pub fn record_stack<'a>(
    measurements: impl IntoIterator<Item = &'a Measurement>,
    stack: &mut ParamHistoryStack,
    dt: f64,
    gains: &EstimatorGains,
    interval: usize,
) -> Result<()> {
    let mut it = measurements.into_iter().peekable();
    let Some(first) = it.peek() else { return Ok(()) };
    let mut rec = StackRecorder::new(first.p.len(), first.u.len(), dt, gains.t1, gains.t2, interval)?;
    for meas in it {
        rec.push(meas, stack)?;
    }
    Ok(())
}

/// Observer plus parameter stack, advanced one measurement at a time.
///
/// Per sample, `θ̂` and `Γ` are advanced first using the stack as it stood
/// before the sample, then the observer ingests the sample with the updated
/// `θ̂`. With online recording enabled the new sample may also extend the
/// stack; `θ̂` stays frozen until the stack is full rank.
#[derive(Debug, Clone)]
pub struct Estimator {
    observer: AdaptiveObserver,
    stack: ParamHistoryStack,
    recorder: Option<StackRecorder>,
    dt: f64,
}

impl Estimator {
    pub fn new(
        first: &Measurement,
        theta0: ThetaVector,
        gamma0: DMatrix<f64>,
        gains: EstimatorGains,
        stack: ParamHistoryStack,
        dt: f64,
    ) -> Result<Self> {
        gains.check_grid(dt)?;
        let observer = AdaptiveObserver::new(first.t, &first.p, &first.u, theta0, gamma0, gains)?;
        Ok(Self { observer, stack, recorder: None, dt })
    }

    /// Keep recording error-system pairs from the incoming data.
    pub fn with_online_recording(mut self, first: &Measurement, interval: usize) -> Result<Self> {
        let g = self.observer.gains();
        let mut rec = StackRecorder::new(first.p.len(), first.u.len(), self.dt, g.t1, g.t2, interval)?;
        rec.push(first, &mut self.stack)?;
        self.recorder = Some(rec);
        Ok(self)
    }

    pub fn step(&mut self, meas: &Measurement) -> Result<()> {
        self.observer.update_theta(&self.stack, self.dt)?;
        self.observer.step(&meas.p, &meas.u, self.dt)?;
        if let Some(rec) = self.recorder.as_mut() {
            rec.push(meas, &mut self.stack)?;
        }
        Ok(())
    }

    pub fn state(&self) -> &ObserverState {
        self.observer.state()
    }

    pub fn stack(&self) -> &ParamHistoryStack {
        &self.stack
    }

    pub fn x_hat(&self) -> DVector<f64> {
        self.observer.state().x_hat()
    }

    pub fn theta_hat(&self) -> &ThetaVector {
        &self.observer.state().theta_hat
    }
}
