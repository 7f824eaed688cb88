//! Experiment harness: configuration, the verify-then-run gate, experiment
//! drivers and result serialization.

pub mod config;
pub mod error;
pub mod experiments;
pub mod record;

use config::ExperimentConfig;
use error::Result;
use record::ResultRecord;

/// Validates `cfg`, then runs its experiment in a pool of `cfg.workers`
/// threads (all cores when unset).
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| error::HarnessError::config("workers", e))?;
    pool.install(|| experiments::run_experiment(cfg))
}

/// [`run`] followed by writing the rows where the config says.
pub fn run_and_emit(cfg: &ExperimentConfig) -> Result<()> {
    let rows = run(cfg)?;
    record::emit(&rows, cfg.output_format, &cfg.output_path, cfg.experiment().id())
}
