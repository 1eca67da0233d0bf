//! Configuration, the end-to-end runner and reporting.

mod config;
mod report;
mod runner;

pub use config::{
    BasisSpec, CostConfig, ExperimentConfig, GainsConfig, IrlConfig, Mode, NamedBasis, ParamStackConfig, PlantConfig,
    PurgeConfig, RunConfig, StackSource,
};
pub use report::{write_report, Summary};
pub use runner::{prepare_param_stack, run_experiment, target_weights, RunReport, SeriesSample, StepTrace};

/// Loads and validates a configuration file (TOML, or JSON by extension).
pub fn load_config(path: impl AsRef<std::path::Path>) -> crate::Result<ExperimentConfig> {
    ExperimentConfig::load(path)
}
