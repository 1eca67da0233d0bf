//! Experiment configuration: a TOML file (or JSON, chosen by extension)
//! whose omitted fields take the documented defaults.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{grid_steps, EstimatorGains};
use crate::irl::{FeatureBasis, MonomialBasis};
use crate::plant::{CostFunction, LinearPlant};
use crate::purge::QualityConfig;

/// Which data feeds the IRL stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Estimated state-action pairs only.
    Observed,
    /// Estimated pairs plus one oracle query per step.
    #[default]
    Query,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "observed" => Ok(Mode::Observed),
            "query" => Ok(Mode::Query),
            other => Err(Error::config("run.mode", format!("expected observed or query, got {other:?}"))),
        }
    }
}

/// Where the parameter history stack comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StackSource {
    /// Recorded before the run from a probing experiment on the same plant.
    #[default]
    Prerecorded,
    /// Filled from the demonstration while it runs. Pure optimal feedback
    /// data never makes the stack full rank, so the parameter estimate then
    /// stays at its initial value.
    Online,
}

/// A monomial basis by name or as explicit `(i, j)` pairs with `i ≤ j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasisSpec {
    Named(NamedBasis),
    Pairs(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedBasis {
    FullQuadratic,
    Squares,
}

impl BasisSpec {
    pub fn build(&self, dim: usize, field: &str) -> Result<MonomialBasis> {
        match self {
            BasisSpec::Named(NamedBasis::FullQuadratic) => Ok(MonomialBasis::full_quadratic(dim)),
            BasisSpec::Named(NamedBasis::Squares) => Ok(MonomialBasis::squares(dim)),
            BasisSpec::Pairs(p) => {
                MonomialBasis::from_pairs(dim, p.clone()).map_err(|e| Error::config(field, e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    /// `[A₁, A₂]` as `n` rows of length `2n`.
    pub a: Vec<Vec<f64>>,
    /// `B` as `n` rows of length `m`.
    pub b: Vec<Vec<f64>>,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self { a: vec![vec![1.0, 1.0, -1.0, 1.0], vec![5.0, 1.0, 1.0, 1.0]], b: vec![vec![1.0, 3.0], vec![0.0, 1.0]] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    /// Basis of the state cost `Q(x) = W_Qᵀσ_Q(x)`.
    pub q_basis: BasisSpec,
    pub w_q: Vec<f64>,
    pub r_diag: Vec<f64>,
    /// First control weight as known to the learner; defaults to `r_diag[0]`.
    pub r1_known: Option<f64>,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            q_basis: BasisSpec::Named(NamedBasis::Squares),
            w_q: vec![1.0, 2.0, 3.0, 6.0],
            r_diag: vec![20.0, 10.0],
            r1_known: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainsConfig {
    /// `k_θ`; defaults to `0.3 / M`.
    pub k_theta: Option<f64>,
    pub beta1: f64,
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
    pub t1: f64,
    pub t2: f64,
    /// Parameter stack capacity `M`.
    pub m: usize,
    /// Full-rank threshold on `λ_min(𝒢)`.
    pub g_lower: f64,
    /// `Γ(0) = gamma0 · I`.
    pub gamma0: f64,
}

impl Default for GainsConfig {
    fn default() -> Self {
        Self {
            k_theta: None,
            beta1: 5.0,
            alpha: 20.0,
            beta: 10.0,
            k: 100.0,
            t1: 1.0,
            t2: 0.8,
            m: 150,
            g_lower: 1e-6,
            gamma0: 0.1,
        }
    }
}

impl GainsConfig {
    pub fn estimator_gains(&self) -> EstimatorGains {
        EstimatorGains {
            k_theta: self.k_theta.unwrap_or(0.3 / self.m as f64),
            beta1: self.beta1,
            alpha: self.alpha,
            beta: self.beta,
            k: self.k,
            t1: self.t1,
            t2: self.t2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamStackConfig {
    pub source: StackSource,
    /// Amplitude of the multisine added to the policy while probing.
    pub probe_amplitude: f64,
    /// Length of the probing run in seconds.
    pub probe_duration: f64,
    /// Seconds between recorded pairs.
    pub record_interval: f64,
}

impl Default for ParamStackConfig {
    fn default() -> Self {
        Self { source: StackSource::Prerecorded, probe_amplitude: 1.0, probe_duration: 10.0, record_interval: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrlConfig {
    /// IRL stack capacity `N`.
    pub n: usize,
    pub xi1: f64,
    pub xi2: f64,
    pub value_basis: BasisSpec,
    pub cost_basis: BasisSpec,
}

impl Default for IrlConfig {
    fn default() -> Self {
        Self {
            n: 30,
            xi1: 1.0,
            xi2: 1e-3,
            value_basis: BasisSpec::Named(NamedBasis::FullQuadratic),
            cost_basis: BasisSpec::Named(NamedBasis::Squares),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PurgeConfig {
    /// Quality horizon `T` in seconds.
    pub horizon: f64,
    /// Smoothing half-width `w` in samples.
    pub half_width: usize,
    /// `S₁` rows; identity when omitted.
    pub s1: Option<Vec<Vec<f64>>>,
    /// `S₂` rows; identity when omitted.
    pub s2: Option<Vec<Vec<f64>>>,
    pub kappa1_bar: f64,
    pub kappa2_bar: f64,
}

impl Default for PurgeConfig {
    fn default() -> Self {
        Self { horizon: 1.0, half_width: 5, s1: None, s2: None, kappa1_bar: 1e6, kappa2_bar: 1e6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub x0: Vec<f64>,
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
    pub mode: Mode,
    pub query_low: f64,
    pub query_high: f64,
    /// Initial weights `W₀`; zero when omitted.
    pub w0: Option<Vec<f64>>,
    /// Initial parameter estimate; zero when omitted.
    pub theta0: Option<Vec<f64>>,
    /// Seconds between report samples; `dt` gives the full rate.
    pub report_interval: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            x0: vec![2.0, -2.0, 1.0, -1.0],
            duration: 30.0,
            dt: 1e-3,
            seed: 0,
            mode: Mode::Query,
            query_low: -2.0,
            query_high: 2.0,
            w0: None,
            theta0: None,
            report_interval: 0.01,
        }
    }
}

/// Everything one run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantConfig,
    pub cost: CostConfig,
    pub gains: GainsConfig,
    pub param_stack: ParamStackConfig,
    pub irl: IrlConfig,
    pub purge: PurgeConfig,
    pub run: RunConfig,
}

fn matrix(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(Error::config(field, "matrix must be nonempty"));
    }
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::config(field, "rows have different lengths"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::config(field, "entries must be finite"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {v}")))
    }
}

/// Whole number of `dt` steps in `span`.
fn steps_of(span: f64, dt: f64, field: &str) -> Result<usize> {
    grid_steps(span, dt, field)
}

impl ExperimentConfig {
    /// Reads TOML, or JSON when the extension is `.json`, then validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let cfg = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text)?
        } else {
            Self::from_toml_str(&text)?
        };
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn build_plant(&self) -> Result<LinearPlant> {
        let a = matrix(&self.plant.a, "plant.a")?;
        let b = matrix(&self.plant.b, "plant.b")?;
        if a.ncols() != 2 * a.nrows() {
            return Err(Error::config("plant.a", format!("expected n x 2n, got {}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != a.nrows() {
            return Err(Error::config("plant.b", format!("expected {} rows, got {}", a.nrows(), b.nrows())));
        }
        LinearPlant::new(a, b).map_err(|e| Error::config("plant", e.to_string()))
    }

    pub fn build_cost(&self, plant: &LinearPlant) -> Result<CostFunction> {
        let q_basis = self.cost.q_basis.build(plant.state_dim(), "cost.q_basis")?;
        if self.cost.w_q.len() != q_basis.len() {
            return Err(Error::config(
                "cost.w_q",
                format!("expected {} weights for the cost basis, got {}", q_basis.len(), self.cost.w_q.len()),
            ));
        }
        if self.cost.r_diag.len() != plant.m() {
            return Err(Error::config(
                "cost.r_diag",
                format!("expected {} entries, got {}", plant.m(), self.cost.r_diag.len()),
            ));
        }
        for (i, r) in self.cost.r_diag.iter().enumerate() {
            positive(&format!("cost.r_diag[{i}]"), *r)?;
        }
        CostFunction::new(
            q_basis,
            DVector::from_vec(self.cost.w_q.clone()),
            DVector::from_vec(self.cost.r_diag.clone()),
        )
        .map_err(|e| Error::config("cost", e.to_string()))
    }

    pub fn r1_known(&self) -> f64 {
        self.cost.r1_known.unwrap_or_else(|| self.cost.r_diag.first().copied().unwrap_or(f64::NAN))
    }

    pub fn feature_basis(&self, plant: &LinearPlant) -> Result<FeatureBasis> {
        let dim = plant.state_dim();
        let value = self.irl.value_basis.build(dim, "irl.value_basis")?;
        let cost = self.irl.cost_basis.build(dim, "irl.cost_basis")?;
        FeatureBasis::new(value, cost, plant.m()).map_err(|e| Error::config("irl", e.to_string()))
    }

    pub fn quality_config(&self, n: usize) -> Result<QualityConfig> {
        let mut q = QualityConfig::with_identity(n, self.purge.horizon, self.purge.half_width);
        if let Some(s1) = &self.purge.s1 {
            q.s1 = matrix(s1, "purge.s1")?;
        }
        if let Some(s2) = &self.purge.s2 {
            q.s2 = matrix(s2, "purge.s2")?;
        }
        Ok(q)
    }

    /// Dimension and positivity checks; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        let plant = self.build_plant()?;
        let (n, m) = (plant.n(), plant.m());
        let cost = self.build_cost(&plant)?;
        positive("cost.r1_known", self.r1_known())?;
        let _ = cost;

        let g = &self.gains;
        if let Some(kt) = g.k_theta {
            positive("gains.k_theta", kt)?;
        }
        for (name, v) in [
            ("gains.beta1", g.beta1),
            ("gains.alpha", g.alpha),
            ("gains.beta", g.beta),
            ("gains.k", g.k),
            ("gains.t1", g.t1),
            ("gains.t2", g.t2),
            ("gains.g_lower", g.g_lower),
            ("gains.gamma0", g.gamma0),
        ] {
            positive(name, v)?;
        }
        if g.m == 0 {
            return Err(Error::config("gains.m", "parameter stack capacity must be positive"));
        }

        let r = &self.run;
        positive("run.dt", r.dt)?;
        if r.x0.len() != 2 * n {
            return Err(Error::config("run.x0", format!("expected {} entries, got {}", 2 * n, r.x0.len())));
        }
        if r.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("run.x0", "entries must be finite"));
        }
        if !(r.duration == 0.0 || r.duration > g.t1 + g.t2) {
            return Err(Error::config(
                "run.duration",
                format!("must be 0 (empty run) or exceed T1 + T2 = {} s, got {}", g.t1 + g.t2, r.duration),
            ));
        }
        steps_of(r.duration, r.dt, "run.duration")?;
        steps_of(g.t1, r.dt, "gains.t1")?;
        steps_of(g.t2, r.dt, "gains.t2")?;
        let every = steps_of(r.report_interval, r.dt, "run.report_interval")?;
        if every == 0 {
            return Err(Error::config("run.report_interval", "must be at least one sample period"));
        }
        if !(r.query_low < r.query_high) || !r.query_low.is_finite() || !r.query_high.is_finite() {
            return Err(Error::config("run.query_low", "query box needs finite query_low < query_high"));
        }

        let basis = self.feature_basis(&plant)?;
        if let Some(w0) = &r.w0 {
            if w0.len() != basis.unknowns() {
                return Err(Error::config(
                    "run.w0",
                    format!("expected {} entries, got {}", basis.unknowns(), w0.len()),
                ));
            }
        }
        if let Some(th) = &r.theta0 {
            let len = 2 * n * n + m * n;
            if th.len() != len {
                return Err(Error::config("run.theta0", format!("expected {len} entries, got {}", th.len())));
            }
        }

        let ps = &self.param_stack;
        positive("param_stack.record_interval", ps.record_interval)?;
        if steps_of(ps.record_interval, r.dt, "param_stack.record_interval")? == 0 {
            return Err(Error::config("param_stack.record_interval", "must be at least one sample period"));
        }
        if ps.source == StackSource::Prerecorded {
            positive("param_stack.probe_amplitude", ps.probe_amplitude)?;
            if !(ps.probe_duration > g.t1 + g.t2) {
                return Err(Error::config("param_stack.probe_duration", "must exceed T1 + T2"));
            }
            steps_of(ps.probe_duration, r.dt, "param_stack.probe_duration")?;
        }

        let irl = &self.irl;
        if irl.n == 0 {
            return Err(Error::config("irl.n", "IRL stack capacity must be positive"));
        }
        positive("irl.xi1", irl.xi1)?;
        positive("irl.xi2", irl.xi2)?;

        let p = &self.purge;
        positive("purge.horizon", p.horizon)?;
        for (name, v) in [("purge.kappa1_bar", p.kappa1_bar), ("purge.kappa2_bar", p.kappa2_bar)] {
            if !(v > 1.0) {
                return Err(Error::config(name, format!("must exceed 1, got {v}")));
            }
        }
        self.quality_config(n)?.validate(n, r.dt).map_err(|e| match e {
            Error::Config { field, reason } => Error::config(format!("purge.{}", field.to_lowercase()), reason),
            other => other,
        })?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_the_default_system() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let g = cfg.gains.estimator_gains();
        assert_eq!((g.k, g.alpha, g.beta, g.beta1), (100.0, 20.0, 10.0, 5.0));
        assert_eq!(g.k_theta, 0.3 / 150.0);
        assert_eq!(cfg.run.x0, vec![2.0, -2.0, 1.0, -1.0]);
        assert_eq!(cfg.r1_known(), 20.0);
    }

    #[test]
    fn zero_alpha_is_rejected_by_name() {
        let err = ExperimentConfig::from_toml_str("[gains]\nalpha = 0.0\n").unwrap_err();
        match err {
            Error::Config { field, .. } => assert_eq!(field, "gains.alpha"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("[run]\nx0 = [1.0, 2.0]\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[cost]\nr_diag = [1.0]\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[plant]\na = [[1.0, 2.0, 3.0]]\nb = [[1.0]]\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[gains]\nt1 = 1.0005\n").is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(matches!(ExperimentConfig::from_toml_str("[gains]\nalpah = 1.0\n"), Err(Error::Parse(_))));
    }

    #[test]
    fn toml_and_json_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.run.mode = Mode::Observed;
        cfg.irl.value_basis = BasisSpec::Pairs(vec![(0, 0), (0, 1), (1, 1), (2, 2), (3, 3)]);
        cfg.cost.r1_known = Some(20.0);
        let t = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&t).unwrap(), cfg);
        let j = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json_str(&j).unwrap(), cfg);
    }

    #[test]
    fn mode_parses() {
        assert_eq!("query".parse::<Mode>().unwrap(), Mode::Query);
        assert!("both".parse::<Mode>().is_err());
    }
}
