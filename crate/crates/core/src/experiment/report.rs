//! CSV series and the JSON summary of a run.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Mode};
use super::runner::{RunReport, SeriesSample};
use crate::error::Result;
use crate::irl::WeightVector;

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub mode: Mode,
    pub steps: usize,
    pub final_p_tilde: Option<f64>,
    pub final_q_tilde: Option<f64>,
    pub final_theta_tilde: Option<f64>,
    pub final_w_tilde: Option<f64>,
    pub final_w_rel_error: f64,
    pub purges: usize,
    /// `κ(Σ̂ᵀΣ̂)` at the end; absent when the stack is rank deficient.
    pub final_kappa: Option<f64>,
    pub residual_norm: f64,
    pub queries: usize,
    pub solves: usize,
    pub w_hat: WeightVector,
    pub w_true: WeightVector,
    pub theta_hat: Vec<f64>,
    pub theta_true: Vec<f64>,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub param_stack_len: usize,
    pub param_stack_lambda_min: f64,
    pub wall_clock_s: f64,
    pub failure: Option<String>,
    pub config: ExperimentConfig,
}

impl Summary {
    pub fn of(report: &RunReport) -> Self {
        let last = report.final_sample();
        let finite = |v: f64| Some(v).filter(|v| v.is_finite());
        Self {
            seed: report.config.run.seed,
            mode: report.config.run.mode,
            steps: report.steps,
            final_p_tilde: last.map(SeriesSample::p_norm),
            final_q_tilde: last.map(SeriesSample::q_norm),
            final_theta_tilde: last.map(SeriesSample::theta_norm),
            final_w_tilde: last.map(SeriesSample::w_norm),
            final_w_rel_error: report.final_w_rel_error(),
            purges: report.purges,
            final_kappa: finite(report.final_kappa),
            residual_norm: report.residual_norm,
            queries: report.queries,
            solves: report.solves,
            w_hat: report.w_hat.clone(),
            w_true: report.w_true.clone(),
            theta_hat: report.theta_hat.clone(),
            theta_true: report.theta_true.clone(),
            gamma_min: report.gamma_min,
            gamma_max: report.gamma_max,
            param_stack_len: report.param_stack_len,
            param_stack_lambda_min: report.param_stack_lambda_min,
            wall_clock_s: report.wall_clock_s,
            failure: report.failure.clone(),
            config: report.config.clone(),
        }
    }
}

fn write_series(
    path: &Path,
    prefix: &str,
    width: usize,
    series: &[SeriesSample],
    pick: impl Fn(&SeriesSample) -> &[f64],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=width).map(|i| format!("{prefix}_{i}")));
    header.push("norm".into());
    w.write_record(&header)?;
    for s in series {
        let v = pick(s);
        let mut rec = Vec::with_capacity(width + 2);
        rec.push(format!("{:.6}", s.t));
        rec.extend(v.iter().map(|x| x.to_string()));
        rec.push(v.iter().map(|x| x * x).sum::<f64>().sqrt().to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `ptilde.csv`, `qtilde.csv`, `thetatilde.csv`, `wtilde.csv` and
/// `summary.json` into `out_dir`, creating it if needed.
pub fn write_report(report: &RunReport, out_dir: impl AsRef<Path>) -> Result<Summary> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir)?;
    let cfg = &report.config;
    let plant = cfg.build_plant()?;
    let (n, m) = (plant.n(), plant.m());
    let unknowns = cfg.feature_basis(&plant)?.unknowns();
    write_series(&dir.join("ptilde.csv"), "p_tilde", n, &report.series, |s| &s.p_tilde)?;
    write_series(&dir.join("qtilde.csv"), "q_tilde", n, &report.series, |s| &s.q_tilde)?;
    write_series(&dir.join("thetatilde.csv"), "theta_tilde", 2 * n * n + m * n, &report.series, |s| &s.theta_tilde)?;
    write_series(&dir.join("wtilde.csv"), "w_tilde", unknowns, &report.series, |s| &s.w_tilde)?;
    let summary = Summary::of(report);
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}
