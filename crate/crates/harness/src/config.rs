//! Experiment configuration: one JSON file, overridden field by field by
//! command-line flags.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    CovarianceCheck,
    Sample,
    FreeEnergy,
    OverlapCdf,
    HighPoints,
    PerturbedFreeEnergy,
    BkCheck,
    GgCheck,
    PdMoments,
    PdBridge,
    SlepianCheck,
}

impl ExperimentKind {
    pub fn id(self) -> &'static str {
        match self {
            Self::CovarianceCheck => "covariance-check",
            Self::Sample => "sample",
            Self::FreeEnergy => "free-energy",
            Self::OverlapCdf => "overlap-cdf",
            Self::HighPoints => "high-points",
            Self::PerturbedFreeEnergy => "perturbed-free-energy",
            Self::BkCheck => "bk-check",
            Self::GgCheck => "gg-check",
            Self::PdMoments => "pd-moments",
            Self::PdBridge => "pd-bridge",
            Self::SlepianCheck => "slepian-check",
        }
    }

    /// Everything except the oracle check itself draws random fields.
    pub fn is_statistical(self) -> bool {
        self != Self::CovarianceCheck
    }

    /// Experiments that never touch the lattice.
    pub fn needs_lattice(self) -> bool {
        self != Self::PdMoments
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Gibbs functional for the Ghirlanda–Guerra check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GgFunctional {
    One,
    #[default]
    Q12,
    HalfIndicator,
}

/// A scalar or a list, both accepted in the JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            Self::One(v) => vec![v.clone()],
            Self::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    pub n: Option<OneOrMany<usize>>,
    /// Lattice variance parameter.
    #[serde(default = "one")]
    pub sigma: f64,
    pub beta: Option<OneOrMany<f64>>,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub alpha: Option<OneOrMany<f64>>,
    #[serde(default)]
    pub u: f64,
    #[serde(default)]
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub q_grid: Vec<f64>,
    #[serde(default = "default_fields")]
    pub field_budget: usize,
    #[serde(default = "default_replicas")]
    pub replica_budget: usize,
    #[serde(default = "default_pd_samples")]
    pub pd_sample_budget: usize,
    /// Replica count for the Ghirlanda–Guerra check.
    #[serde(default = "two")]
    pub replicas: usize,
    #[serde(default)]
    pub gg_functional: GgFunctional,
    /// Largest moment order in `pd-moments`.
    #[serde(default = "four")]
    pub max_order: u32,
    pub root_seed: Option<u64>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub output_path: String,
    #[serde(default)]
    pub output_format: OutputFormat,
    /// Run the covariance oracle before statistical experiments.
    #[serde(default = "yes")]
    pub verify: bool,
    /// Record wall-clock times; off by default so reruns are bitwise equal.
    #[serde(default)]
    pub timing: bool,
}

fn one() -> f64 {
    1.0
}
fn two() -> usize {
    2
}
fn four() -> u32 {
    4
}
fn yes() -> bool {
    true
}
fn default_fields() -> usize {
    100
}
fn default_replicas() -> usize {
    1000
}
fn default_pd_samples() -> usize {
    10_000
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

/// Command-line values that replace config entries when present.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub experiment: Option<ExperimentKind>,
    pub n: Option<Vec<usize>>,
    pub beta: Option<Vec<f64>>,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub alpha: Option<Vec<f64>>,
    pub u: Option<f64>,
    pub gammas: Option<Vec<f64>>,
    pub q_grid: Option<Vec<f64>>,
    pub field_budget: Option<usize>,
    pub replica_budget: Option<usize>,
    pub pd_sample_budget: Option<usize>,
    pub root_seed: Option<u64>,
    pub workers: Option<usize>,
    pub output_path: Option<String>,
    pub output_format: Option<OutputFormat>,
    pub no_verify: bool,
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::config("config", e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: Overrides) {
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = o.$field {
                    self.$field = v;
                }
            };
            ($field:ident, wrap) => {
                if let Some(v) = o.$field {
                    self.$field = Some(v);
                }
            };
            ($field:ident, many) => {
                if let Some(v) = o.$field {
                    self.$field = Some(OneOrMany::Many(v));
                }
            };
        }
        take!(experiment, wrap);
        take!(n, many);
        take!(beta, many);
        take!(sigma1, wrap);
        take!(sigma2, wrap);
        take!(alpha, many);
        take!(u);
        take!(gammas);
        take!(q_grid);
        take!(field_budget);
        take!(replica_budget);
        take!(pd_sample_budget);
        take!(root_seed, wrap);
        take!(workers, wrap);
        take!(output_path);
        take!(output_format);
        if o.no_verify {
            self.verify = false;
        }
        if o.timing {
            self.timing = true;
        }
    }

    pub fn experiment(&self) -> ExperimentKind {
        self.experiment.expect("validated")
    }

    pub fn seed(&self) -> u64 {
        self.root_seed.expect("validated")
    }

    pub fn ns(&self) -> Vec<usize> {
        self.n.as_ref().map(OneOrMany::to_vec).unwrap_or_default()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.beta.as_ref().map(OneOrMany::to_vec).unwrap_or_default()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.alpha.as_ref().map(OneOrMany::to_vec).unwrap_or_default()
    }

    /// Checks every field the chosen experiment reads. Returns warnings
    /// that do not prevent a run.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        let kind = self
            .experiment
            .ok_or_else(|| HarnessError::config("experiment", "missing"))?;
        if self.root_seed.is_none() {
            return Err(HarnessError::config(
                "rootSeed",
                "missing; a root seed is required for reproducibility",
            ));
        }
        for (name, v) in [
            ("fieldBudget", self.field_budget),
            ("replicaBudget", self.replica_budget),
            ("pdSampleBudget", self.pd_sample_budget),
        ] {
            if v < 1 {
                return Err(HarnessError::config(name, "must be at least 1"));
            }
        }
        if kind.is_statistical() && kind != ExperimentKind::PdMoments && self.field_budget < 2 {
            return Err(HarnessError::config(
                "fieldBudget",
                "standard errors need at least 2 fields",
            ));
        }
        if kind == ExperimentKind::PdMoments && self.pd_sample_budget < 2 {
            return Err(HarnessError::config(
                "pdSampleBudget",
                "standard errors need at least 2 samples",
            ));
        }
        if self.workers == Some(0) {
            return Err(HarnessError::config("workers", "must be at least 1"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(HarnessError::config("sigma", "must be positive"));
        }
        if kind.needs_lattice() {
            let ns = self.ns();
            if ns.is_empty() {
                return Err(HarnessError::config("n", "at least one lattice size is required"));
            }
            for &n in &ns {
                if n < 4 {
                    return Err(HarnessError::config("n", format!("{n} is below the minimum of 4")));
                }
                if !n.is_power_of_two() {
                    warnings.push(format!("n = {n} is not a power of two"));
                }
            }
        }
        let needs_beta = matches!(
            kind,
            ExperimentKind::FreeEnergy
                | ExperimentKind::OverlapCdf
                | ExperimentKind::PerturbedFreeEnergy
                | ExperimentKind::BkCheck
                | ExperimentKind::GgCheck
                | ExperimentKind::PdBridge
        );
        if needs_beta {
            let betas = self.betas();
            if betas.is_empty() {
                return Err(HarnessError::config(
                    "beta",
                    "at least one inverse temperature is required",
                ));
            }
            if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
                return Err(HarnessError::config("beta", format!("{b} is not positive")));
            }
        }
        let needs_alpha = matches!(
            kind,
            ExperimentKind::PerturbedFreeEnergy
                | ExperimentKind::BkCheck
                | ExperimentKind::PdMoments
                | ExperimentKind::SlepianCheck
        );
        if needs_alpha {
            let alphas = self.alphas();
            if alphas.is_empty() {
                return Err(HarnessError::config("alpha", "required for this experiment"));
            }
            if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
                return Err(HarnessError::config("alpha", format!("{a} outside (0, 1)")));
            }
        }
        if matches!(kind, ExperimentKind::PerturbedFreeEnergy | ExperimentKind::SlepianCheck) {
            for (name, v) in [("sigma1", self.sigma1), ("sigma2", self.sigma2)] {
                match v {
                    Some(s) if s > 0.0 && s.is_finite() => {}
                    Some(s) => return Err(HarnessError::config(name, format!("{s} is not positive"))),
                    None => return Err(HarnessError::config(name, "required for this experiment")),
                }
            }
        }
        if kind == ExperimentKind::BkCheck && (self.u.is_nan() || 1.0 + self.u <= 0.0) {
            return Err(HarnessError::config("u", "1 + u must be positive"));
        }
        if kind == ExperimentKind::HighPoints && self.gammas.is_empty() {
            return Err(HarnessError::config("gammas", "at least one level is required"));
        }
        if let Some(g) = self.gammas.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(HarnessError::config("gammas", format!("{g} is not positive")));
        }
        if kind == ExperimentKind::OverlapCdf && self.q_grid.is_empty() {
            return Err(HarnessError::config("qGrid", "at least one overlap level is required"));
        }
        if let Some(q) = self.q_grid.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return Err(HarnessError::config("qGrid", format!("{q} outside [0, 1]")));
        }
        if kind == ExperimentKind::GgCheck && self.replicas < 2 {
            return Err(HarnessError::config(
                "replicas",
                "the identity needs at least 2 replicas",
            ));
        }
        if kind == ExperimentKind::PdMoments && !(1..=8).contains(&self.max_order) {
            return Err(HarnessError::config("maxOrder", "must lie in 1..=8"));
        }
        Ok(warnings)
    }
}
