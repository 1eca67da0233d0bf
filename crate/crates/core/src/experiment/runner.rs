//! End-to-end run: demonstrator → estimator → IRL stack → purge policy on
//! one sample clock.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Mode, StackSource};
use crate::error::Result;
use crate::estimator::{grid_steps, record_stack, Estimator, ParamHistoryStack, ThetaVector};
use crate::irl::{row_block, true_weights, FeatureBasis, IrlEntry, IrlHistoryStack, WeightVector};
use crate::plant::{make_demonstrator, multisine_probe, Demonstrator, DemonstratorRun, Measurement};
use crate::purge::{purge_policy, PurgeState, QualityMonitor};

/// Estimation errors at one report instant (estimate minus truth).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSample {
    pub t: f64,
    pub p_tilde: Vec<f64>,
    pub q_tilde: Vec<f64>,
    pub theta_tilde: Vec<f64>,
    pub w_tilde: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl SeriesSample {
    pub fn p_norm(&self) -> f64 {
        norm(&self.p_tilde)
    }
    pub fn q_norm(&self) -> f64 {
        norm(&self.q_tilde)
    }
    pub fn theta_norm(&self) -> f64 {
        norm(&self.theta_tilde)
    }
    pub fn w_norm(&self) -> f64 {
        norm(&self.w_tilde)
    }
}

/// Bookkeeping of one grid step, for auditing the selection and policy
/// gates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub t: f64,
    /// Whether any candidate was stored this step.
    pub varpi: bool,
    /// `κ(Σ̂ᵀΣ̂)` seen by the policy.
    pub kappa_gram: f64,
    /// Composite quality `η(t)`.
    pub eta: f64,
    /// Minimum stored quality seen by the policy.
    pub eta_bar: f64,
    pub solved: bool,
    pub purged: bool,
    pub w_changed: bool,
    /// `‖Σ_u1‖` right after data selection.
    pub sigma_u1_norm: f64,
    /// IRL stack size right after data selection.
    pub selected_len: usize,
    /// IRL stack size at the end of the step.
    pub stack_len: usize,
    /// `‖Ŵ − W‖ / ‖W‖` at the end of the step.
    pub w_rel_error: f64,
}

/// Everything a run produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub series: Vec<SeriesSample>,
    #[serde(skip)]
    pub trace: Vec<StepTrace>,
    /// Purge count `s`.
    pub purges: usize,
    /// `κ(Σ̂ᵀΣ̂)` of the IRL stack at the end.
    pub final_kappa: f64,
    /// `‖Σ̂Ŵ + Σ_u1‖` at the end (0 for an empty stack).
    pub residual_norm: f64,
    pub w_hat: WeightVector,
    pub w_true: WeightVector,
    pub theta_hat: Vec<f64>,
    pub theta_true: Vec<f64>,
    /// Extreme eigenvalues of `Γ` over the run.
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub param_stack_len: usize,
    pub param_stack_lambda_min: f64,
    pub steps: usize,
    pub queries: usize,
    pub solves: usize,
    pub wall_clock_s: f64,
    /// Fatal error that ended the run early.
    pub failure: Option<String>,
}

impl RunReport {
    pub fn final_sample(&self) -> Option<&SeriesSample> {
        self.series.last()
    }

    pub fn final_w_rel_error(&self) -> f64 {
        self.w_hat.relative_error(&self.w_true)
    }
}

/// Builds the parameter stack per the configuration: a probing run with a
/// multisine added to the optimal policy, or an empty stack for online
/// filling.
pub fn prepare_param_stack(cfg: &ExperimentConfig, demo: &Demonstrator) -> Result<ParamHistoryStack> {
    let plant = demo.plant();
    let theta_len = ThetaVector::len_for(plant.n(), plant.m());
    let mut stack = ParamHistoryStack::new(cfg.gains.m, cfg.gains.g_lower, theta_len)?;
    if cfg.param_stack.source == StackSource::Online {
        return Ok(stack);
    }
    let dt = cfg.run.dt;
    let ps = &cfg.param_stack;
    let probe = multisine_probe(plant.m(), ps.probe_amplitude);
    let mut run = DemonstratorRun::new(demo, DVector::from_vec(cfg.run.x0.clone()), dt)?.with_probe(&probe);
    let steps = grid_steps(ps.probe_duration, dt, "param_stack.probe_duration")?;
    let mut data = Vec::with_capacity(steps + 1);
    data.push(run.measurement());
    for _ in 0..steps {
        data.push(run.step()?);
    }
    let interval = grid_steps(ps.record_interval, dt, "param_stack.record_interval")?;
    record_stack(&data, &mut stack, dt, &cfg.gains.estimator_gains(), interval)?;
    Ok(stack)
}

/// Ideal weights for the learner's basis, scaled to the learner's `r₁`.
pub fn target_weights(cfg: &ExperimentConfig, demo: &Demonstrator, basis: &FeatureBasis) -> Result<WeightVector> {
    let w = true_weights(demo, basis)?;
    let k = cfg.r1_known() / w.r1;
    Ok(WeightVector { w_v: w.w_v * k, w_q: w.w_q * k, w_r_minus: w.w_r_minus * k, r1: cfg.r1_known() })
}

struct Truth<'a> {
    theta: &'a DVector<f64>,
    w: &'a DVector<f64>,
    n: usize,
}

fn sample(t: f64, x: &DVector<f64>, est: &Estimator, w_hat: &WeightVector, truth: &Truth) -> SeriesSample {
    let s = est.state();
    let n = truth.n;
    SeriesSample {
        t,
        p_tilde: (&s.p_hat - x.rows(0, n)).iter().copied().collect(),
        q_tilde: (&s.q_hat - x.rows(n, n)).iter().copied().collect(),
        theta_tilde: (s.theta_hat.as_vector() - truth.theta).iter().copied().collect(),
        w_tilde: (w_hat.stacked() - truth.w).iter().copied().collect(),
    }
}

/// Runs the configured experiment. Configuration and setup problems are
/// errors; a fatal numerical error during the run ends it early and is
/// recorded in [`RunReport::failure`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let started = Instant::now();
    cfg.validate()?;
    let plant = cfg.build_plant()?;
    let cost = cfg.build_cost(&plant)?;
    let demo = make_demonstrator(plant.clone(), cost)?;
    let basis = cfg.feature_basis(&plant)?;
    let (n, m) = (plant.n(), plant.m());
    let dt = cfg.run.dt;
    let r1 = cfg.r1_known();

    let w_true = target_weights(cfg, &demo, &basis)?;
    let w0 = match &cfg.run.w0 {
        Some(w) => WeightVector::from_stacked(&basis, &DVector::from_vec(w.clone()), r1)?,
        None => WeightVector::zeros(&basis, r1),
    };
    let theta_true = plant.theta();
    let mut report = RunReport {
        config: cfg.clone(),
        series: Vec::new(),
        trace: Vec::new(),
        purges: 0,
        final_kappa: f64::INFINITY,
        residual_norm: 0.0,
        w_hat: w0.clone(),
        w_true: w_true.clone(),
        theta_hat: Vec::new(),
        theta_true: theta_true.as_vector().iter().copied().collect(),
        gamma_min: cfg.gains.gamma0,
        gamma_max: cfg.gains.gamma0,
        param_stack_len: 0,
        param_stack_lambda_min: 0.0,
        steps: 0,
        queries: 0,
        solves: 0,
        wall_clock_s: 0.0,
        failure: None,
    };
    let theta0 = match &cfg.run.theta0 {
        Some(v) => ThetaVector::from_vector(n, m, DVector::from_vec(v.clone()))?,
        None => ThetaVector::zeros(n, m),
    };
    report.theta_hat = theta0.as_vector().iter().copied().collect();
    let steps = grid_steps(cfg.run.duration, dt, "run.duration")?;
    if steps == 0 {
        report.wall_clock_s = started.elapsed().as_secs_f64();
        return Ok(report);
    }

    let param_stack = prepare_param_stack(cfg, &demo)?;
    let mut run = DemonstratorRun::new(&demo, DVector::from_vec(cfg.run.x0.clone()), dt)?;
    let first = run.measurement();
    let gamma0 = DMatrix::identity(theta0.as_vector().len(), theta0.as_vector().len()) * cfg.gains.gamma0;
    let mut est = Estimator::new(&first, theta0, gamma0, cfg.gains.estimator_gains(), param_stack, dt)?;
    if cfg.param_stack.source == StackSource::Online {
        let interval = grid_steps(cfg.param_stack.record_interval, dt, "param_stack.record_interval")?;
        est = est.with_online_recording(&first, interval)?;
    }
    let mut monitor = QualityMonitor::new(cfg.quality_config(n)?, n, m, dt)?;
    monitor.update(first.t, &first.p, &first.u, est.state())?;
    let mut irl_stack = IrlHistoryStack::new(cfg.irl.n, &basis, cfg.irl.xi1, cfg.irl.xi2)?;
    let mut ps = PurgeState::new(cfg.purge.kappa1_bar, cfg.purge.kappa2_bar, w0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let every = grid_steps(cfg.run.report_interval, dt, "run.report_interval")?;
    let truth = Truth { theta: theta_true.as_vector(), w: &w_true.stacked(), n };
    report.series.push(sample(first.t, run.state(), &est, &ps.w_current, &truth));

    for k in 1..=steps {
        let step =
            step_once(cfg, &demo, &basis, r1, &mut run, &mut est, &mut monitor, &mut irl_stack, &mut ps, &mut rng);
        let (meas, tr, queried) = match step {
            Ok(v) => v,
            Err(e) => {
                report.failure = Some(format!("t = {:.6} s: {e}", run.time()));
                break;
            }
        };
        report.steps = k;
        report.queries += queried as usize;
        report.solves += tr.solved as usize;
        let e = est.state().gamma.clone().symmetric_eigenvalues();
        report.gamma_min = report.gamma_min.min(e.min());
        report.gamma_max = report.gamma_max.max(e.max());
        let tr = StepTrace { w_rel_error: ps.w_current.relative_error(&w_true), ..tr };
        report.trace.push(tr);
        if k % every == 0 {
            report.series.push(sample(meas.t, run.state(), &est, &ps.w_current, &truth));
        }
    }

    report.purges = ps.s;
    report.final_kappa = irl_stack.kappa_gram();
    report.residual_norm = irl_stack.residual_norm(&ps.w_current);
    report.w_hat = ps.w_current;
    report.theta_hat = est.theta_hat().as_vector().iter().copied().collect();
    report.param_stack_len = est.stack().len();
    report.param_stack_lambda_min = est.stack().lambda_min();
    report.wall_clock_s = started.elapsed().as_secs_f64();
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn step_once(
    cfg: &ExperimentConfig,
    demo: &Demonstrator,
    basis: &FeatureBasis,
    r1: f64,
    run: &mut DemonstratorRun,
    est: &mut Estimator,
    monitor: &mut QualityMonitor,
    irl_stack: &mut IrlHistoryStack,
    ps: &mut PurgeState,
    rng: &mut ChaCha8Rng,
) -> Result<(Measurement, StepTrace, bool)> {
    // the estimator only ever sees (t, p, u)
    let meas = run.step()?;
    est.step(&meas)?;
    let t = meas.t;
    let (eta1, eta2) = monitor.update(t, &meas.p, &meas.u, est.state())?;
    let eta = if t < cfg.purge.horizon { f64::INFINITY } else { eta1 + eta2 };

    let theta_hat = est.theta_hat().clone();
    let (rows, rhs) = row_block(basis, &est.x_hat(), &meas.u, &theta_hat, r1)?;
    let mut varpi = irl_stack.data_select(IrlEntry { rows, rhs, eta, t })?;
    let mut queried = false;
    if cfg.run.mode == Mode::Query {
        let (lo, hi) = (cfg.run.query_low, cfg.run.query_high);
        let x_star = DVector::from_fn(basis.state_dim(), |_, _| rng.random_range(lo..hi));
        let u_star = demo.query(&x_star);
        queried = true;
        let (rows, rhs) = row_block(basis, &x_star, &u_star, &theta_hat, r1)?;
        varpi |= irl_stack.data_select(IrlEntry { rows, rhs, eta, t })?;
    }
    let sigma_u1_norm = irl_stack.sigma_u1().norm();
    let selected_len = irl_stack.len();

    ps.varpi = varpi;
    let kappa_gram = irl_stack.kappa_gram();
    let eta_bar = irl_stack.eta_bar();
    let w_before = ps.w_current.clone();
    let outcome = purge_policy(ps, irl_stack, basis, eta)?;
    let trace = StepTrace {
        t,
        varpi,
        kappa_gram,
        eta,
        eta_bar,
        solved: outcome.solved,
        purged: outcome.purged,
        w_changed: ps.w_current != w_before,
        sigma_u1_norm,
        selected_len,
        stack_len: irl_stack.len(),
        w_rel_error: f64::NAN,
    };
    Ok((meas, trace, queried))
}
