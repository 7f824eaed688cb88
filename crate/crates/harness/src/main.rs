use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use logrem_harness::config::{ExperimentConfig, ExperimentKind, OutputFormat, Overrides};
use logrem_harness::error::{exit, HarnessError};

/// Runs one experiment on log-correlated fields and writes its result rows.
#[derive(Debug, Parser)]
#[command(name = "logrem", version, about)]
struct Cli {
    /// Experiment to run; overrides the config file.
    experiment: Option<ExperimentKind>,

    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Lattice sizes.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,

    /// Inverse temperatures.
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<f64>>,

    #[arg(long)]
    sigma1: Option<f64>,

    #[arg(long)]
    sigma2: Option<f64>,

    /// Scale splits of the two-scale field, or PD parameters.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,

    /// Perturbation size for the derivative check.
    #[arg(long)]
    u: Option<f64>,

    /// Normalized levels: threshold `sqrt(2) gamma log N`.
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,

    #[arg(long = "q-grid", value_delimiter = ',')]
    q_grid: Option<Vec<f64>>,

    /// Independent fields per estimate.
    #[arg(long)]
    fields: Option<usize>,

    /// Replica draws per field.
    #[arg(long)]
    replicas: Option<usize>,

    /// Sampled partitions per PD estimate.
    #[arg(long = "pd-samples")]
    pd_samples: Option<usize>,

    /// Root seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads.
    #[arg(long, env = "LOGREM_WORKERS")]
    workers: Option<usize>,

    /// Output file; stdout when empty.
    #[arg(long)]
    out: Option<String>,

    #[arg(long)]
    format: Option<OutputFormat>,

    /// Skip the covariance oracle before statistical experiments.
    #[arg(long)]
    no_verify: bool,

    /// Record wall-clock times per cell.
    #[arg(long)]
    timing: bool,
}

fn config(cli: Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(Overrides {
        experiment: cli.experiment,
        n: cli.n,
        beta: cli.beta,
        sigma1: cli.sigma1,
        sigma2: cli.sigma2,
        alpha: cli.alpha,
        u: cli.u,
        gammas: cli.gammas,
        q_grid: cli.q_grid,
        field_budget: cli.fields,
        replica_budget: cli.replicas,
        pd_sample_budget: cli.pd_samples,
        root_seed: cli.seed,
        workers: cli.workers,
        output_path: cli.out,
        output_format: cli.format,
        no_verify: cli.no_verify,
        timing: cli.timing,
    });
    Ok(cfg)
}

fn fail(e: &HarnessError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
            return fail(&HarnessError::config("arguments", first));
        }
    };
    let cfg = match config(cli) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e),
    };
    match cfg.validate() {
        Ok(warnings) => {
            for w in warnings {
                eprintln!("{}", serde_json::json!({ "warning": w }));
            }
        }
        Err(e) => return fail(&e),
    }
    match logrem_harness::run_and_emit(&cfg) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => fail(&e),
    }
}
