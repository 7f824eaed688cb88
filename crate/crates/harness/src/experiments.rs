//! One routine per experiment. Cells (one per parameter combination) run in
//! order, each with its own child seed of the root seed.

use std::f64::consts::SQRT_2;
use std::time::Instant;

use logrem_core::field::{circulant_eigenvalues, dense_eigenvalues, strip_covariance};
use logrem_core::gibbs::{
    free_energy_curve, gg_residual, high_point_estimate, overlap_cdf_estimate, overlap_functional_estimate,
    pair_functional_estimate, ultrametric_indicator,
};
use logrem_core::pd::{moment_estimates, pd_functional, recursion_residuals, tail_square_estimate};
use logrem_core::perturbed::{
    bk_cross_check, bk_derivative_fd, bk_derivative_lhs, comparison_violation, slepian_tails, HierarchicalSampler,
};
use logrem_core::quadrature::strip_covariance_quadrature;
use logrem_core::stats::par_tasks;
use logrem_core::theory::{self, PredictionKind as K};
use logrem_core::{
    child_seed, Estimate, FieldSource, HeightBand, LatticeSpec, MomentSpec, OverlapMatrix, PdBudget, PerturbationSpec,
    ReplicaBudget, SpectralSampler, TwoScaleSampler,
};

use crate::config::{ExperimentConfig, ExperimentKind, GgFunctional};
use crate::error::{HarnessError, Result};
use crate::record::ResultRecord;

/// Agreement required between closed-form and quadrature covariances, and
/// between spectral and dense eigenvalues, relative to `max(1, |value|)`.
pub const ORACLE_TOLERANCE: f64 = 1e-8;
/// Quadrature accuracy requested by the oracle.
const QUADRATURE_TOL: f64 = 1e-11;
/// Largest number of distances the oracle checks per band.
const ORACLE_DISTANCES: usize = 513;
/// Dense eigendecomposition is only run up to this size.
const DENSE_MAX_N: usize = 256;
/// The exact comparison-field check is quadratic in `n`.
const SLEPIAN_ANALYTIC_MAX_N: usize = 4096;
/// Step for the finite-difference derivative in `sigma2`.
const FD_STEP: f64 = 0.05;
/// Standard errors subtracted before a domination excess counts.
const DOMINATION_SE: f64 = 3.0;
/// Default Slepian levels, as fractions of the maximal level.
const SLEPIAN_LEVELS: (f64, f64, usize) = (0.5, 1.1, 12);

/// Distances `0..=n/2` in lattice units, thinned to an even grid for large `n`.
pub fn oracle_distances(n: usize) -> Vec<usize> {
    let half = n / 2;
    if half < ORACLE_DISTANCES {
        return (0..=half).collect();
    }
    let steps = ORACLE_DISTANCES - 1;
    let mut d: Vec<usize> = (0..=steps).map(|k| (k * half + steps / 2) / steps).collect();
    d.dedup();
    d
}

/// Outcome of the covariance oracle at one lattice size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSummary {
    pub n: usize,
    /// Largest closed-form vs quadrature gap over the checked distances and bands.
    pub quadrature_delta: f64,
    /// Smallest eigenvalue of the circulant covariance before clamping.
    pub min_eigenvalue: f64,
    pub clamped: usize,
    /// Largest spectral vs dense eigenvalue gap, for small `n`.
    pub dense_delta: Option<f64>,
}

impl OracleSummary {
    pub fn passes(&self) -> bool {
        self.quadrature_delta <= ORACLE_TOLERANCE
            && self.min_eigenvalue >= 0.0
            && self.dense_delta.is_none_or(|d| d <= ORACLE_TOLERANCE)
    }
}

/// Closed form vs quadrature for the full band and both halves of the
/// two-scale split, and the spectrum of the full-band covariance.
pub fn covariance_oracle(lattice: LatticeSpec) -> Result<OracleSummary> {
    let n = lattice.n();
    let sigma2 = lattice.sigma2();
    let mid = lattice.eps().sqrt();
    let bands = [
        HeightBand::full(&lattice),
        HeightBand::above(mid)?,
        HeightBand::new(lattice.eps(), mid)?,
    ];
    let mut quadrature_delta: f64 = 0.0;
    for d in oracle_distances(n) {
        let ell = d as f64 / n as f64;
        for band in &bands {
            let closed = strip_covariance(ell, band, sigma2);
            let quad = strip_covariance_quadrature(ell, band.lo(), band.hi(), sigma2, QUADRATURE_TOL);
            quadrature_delta = quadrature_delta.max((closed - quad).abs() / closed.abs().max(1.0));
        }
    }
    let row = logrem_core::field::build_covariance_matrix(&lattice, &bands[0]);
    let raw = circulant_eigenvalues(&row)?;
    let min_eigenvalue = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let sampler = SpectralSampler::new(lattice, bands[0])?;
    let dense_delta = (n <= DENSE_MAX_N).then(|| {
        let mut spectral = sampler.eigenvalues().to_vec();
        spectral.sort_by(f64::total_cmp);
        let mut dense = dense_eigenvalues(&lattice, &bands[0]);
        dense.sort_by(f64::total_cmp);
        let scale = dense.last().copied().unwrap_or(1.0).max(1.0);
        spectral
            .iter()
            .zip(&dense)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / scale
    });
    Ok(OracleSummary {
        n,
        quadrature_delta,
        min_eigenvalue,
        clamped: sampler.clamp_report().count,
        dense_delta,
    })
}

/// Whether `|estimate - theory|` shrinks along a sequence of cells: no
/// increase beyond two combined standard errors, and at most one within.
pub fn gaps_shrink(points: &[(f64, f64)]) -> bool {
    let mut inversions = 0;
    for w in points.windows(2) {
        let ((g0, s0), (g1, s1)) = (w[0], w[1]);
        if g1 > g0 {
            if g1 - g0 > 2.0 * s0.hypot(s1) {
                return false;
            }
            inversions += 1;
        }
    }
    inversions <= 1
}

fn gap(r: &ResultRecord) -> (f64, f64) {
    ((r.estimate - r.theory.unwrap_or(0.0)).abs(), r.se.unwrap_or(0.0))
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    id: &'static str,
    cell: u64,
    rows: Vec<ResultRecord>,
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Self {
        Self {
            cfg,
            id: cfg.experiment().id(),
            cell: 0,
            rows: Vec::new(),
        }
    }

    /// Runs one cell with the next child seed; stamps its rows with the
    /// elapsed time when timing is on.
    fn cell(&mut self, f: impl FnOnce(&Self, u64) -> Result<Vec<ResultRecord>>) -> Result<()> {
        let seed = child_seed(self.cfg.seed(), self.cell);
        self.cell += 1;
        let start = Instant::now();
        let mut rows = f(self, seed)?;
        if self.cfg.timing {
            let ms = start.elapsed().as_secs_f64() * 1e3;
            rows.iter_mut().for_each(|r| r.wallclock_ms = ms);
        }
        self.rows.extend(rows);
        Ok(())
    }

    fn rec(&self, metric: impl Into<String>, seed: u64) -> ResultRecord {
        ResultRecord::new(self.id, metric, seed)
    }

    fn lattice(&self, n: usize) -> Result<LatticeSpec> {
        LatticeSpec::new(n, self.cfg.sigma).map_err(|e| HarnessError::config("n", e))
    }

    /// Adds a verdict row per series: rows with equal `key` across `n`, in
    /// the order the cells ran.
    fn verdicts<T: PartialEq + Copy>(&mut self, metric: &str, key: impl Fn(&ResultRecord) -> Option<T>) {
        if self.cfg.ns().len() < 2 {
            return;
        }
        let mut keys: Vec<T> = Vec::new();
        for r in self.rows.iter().filter(|r| r.metric == metric) {
            if let Some(k) = key(r) {
                if !keys.contains(&k) {
                    keys.push(k);
                }
            }
        }
        let mut extra = Vec::new();
        for k in keys {
            let series: Vec<&ResultRecord> = self
                .rows
                .iter()
                .filter(|r| r.metric == metric && key(r) == Some(k))
                .collect();
            let points: Vec<(f64, f64)> = series.iter().map(|r| gap(r)).collect();
            let last = series[series.len() - 1];
            let mut v = last.clone();
            v.metric = format!("trend-verdict:{metric}");
            v.n = None;
            v.estimate = if gaps_shrink(&points) { 1.0 } else { 0.0 };
            v.se = None;
            v.theory = None;
            v.theory_tag = crate::record::NO_LIMIT.to_owned();
            v.wallclock_ms = 0.0;
            extra.push(v);
        }
        self.rows.extend(extra);
    }
}

/// Runs the covariance oracle ahead of a statistical experiment.
pub fn verify_gate(cfg: &ExperimentConfig) -> Result<()> {
    let mut ns = cfg.ns();
    if ns.is_empty() {
        ns.push(64);
    }
    for n in ns {
        let lattice = LatticeSpec::new(n, cfg.sigma).map_err(|e| HarnessError::config("n", e))?;
        let summary = covariance_oracle(lattice)?;
        if !summary.passes() {
            return Err(HarnessError::Oracle {
                check: "covariance-check".into(),
                detail: format!("{summary:?}"),
            });
        }
    }
    Ok(())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let kind = cfg.experiment();
    if cfg.verify && kind.is_statistical() {
        verify_gate(cfg)?;
    }
    let mut r = Runner::new(cfg);
    match kind {
        ExperimentKind::CovarianceCheck => covariance_check(&mut r)?,
        ExperimentKind::Sample => sample(&mut r)?,
        ExperimentKind::FreeEnergy => free_energy(&mut r)?,
        ExperimentKind::OverlapCdf => overlap_cdf(&mut r)?,
        ExperimentKind::HighPoints => high_points(&mut r)?,
        ExperimentKind::PerturbedFreeEnergy => perturbed_free_energy(&mut r)?,
        ExperimentKind::BkCheck => bk_check(&mut r)?,
        ExperimentKind::GgCheck => gg_check(&mut r)?,
        ExperimentKind::PdMoments => pd_moments(&mut r)?,
        ExperimentKind::PdBridge => pd_bridge(&mut r)?,
        ExperimentKind::SlepianCheck => slepian_check(&mut r)?,
    }
    Ok(r.rows)
}

fn covariance_check(r: &mut Runner) -> Result<()> {
    let mut failed = Vec::new();
    for n in r.cfg.ns() {
        r.cell(|r, seed| {
            let lattice = r.lattice(n)?;
            let s = covariance_oracle(lattice)?;
            if !s.passes() {
                failed.push(s);
            }
            let sigma2 = lattice.sigma2();
            let full = HeightBand::full(&lattice);
            let mut rows = vec![
                r.rec("quadrature-max-delta", seed)
                    .n(n)
                    .value(s.quadrature_delta)
                    .theory(K::OracleAgreement, 0.0),
                r.rec("min-eigenvalue", seed).n(n).value(s.min_eigenvalue),
                r.rec("clamped-eigenvalues", seed).n(n).value(s.clamped as f64),
                r.rec("variance", seed)
                    .n(n)
                    .value(strip_covariance(0.0, &full, sigma2))
                    .theory(K::ConeCovariance, theory::cone_variance(n, sigma2)),
                r.rec("covariance-half", seed)
                    .n(n)
                    .value(strip_covariance(0.5, &full, sigma2))
                    .theory(K::ConeCovariance, theory::cone_covariance(0.5, sigma2)),
            ];
            if let Some(d) = s.dense_delta {
                rows.push(
                    r.rec("dense-eigen-max-delta", seed)
                        .n(n)
                        .value(d)
                        .theory(K::OracleAgreement, 0.0),
                );
            }
            Ok(rows)
        })?;
    }
    if let Some(s) = failed.first() {
        return Err(HarnessError::Oracle {
            check: "covariance-check".into(),
            detail: format!("{s:?}"),
        });
    }
    Ok(())
}

fn sample(r: &mut Runner) -> Result<()> {
    for n in r.cfg.ns() {
        r.cell(|r, seed| {
            let lattice = r.lattice(n)?;
            let sampler = SpectralSampler::full(lattice)?;
            let stats = par_tasks(r.cfg.field_budget, seed, |_, rng| {
                let x = sampler.draw(rng);
                let mean = |f: &dyn Fn(usize) -> f64| (0..n).map(f).sum::<f64>() / n as f64;
                [
                    mean(&|i| x[i] * x[i]),
                    mean(&|i| x[i] * x[(i + 1) % n]),
                    mean(&|i| x[i] * x[(i + n / 2) % n]),
                ]
            });
            let column = |k: usize| Estimate::from_samples(&stats.iter().map(|s| s[k]).collect::<Vec<_>>());
            let sigma2 = lattice.sigma2();
            Ok(vec![
                r.rec("variance", seed)
                    .n(n)
                    .estimate(column(0))
                    .theory(K::ConeCovariance, theory::cone_variance(n, sigma2)),
                r.rec("covariance-neighbour", seed)
                    .n(n)
                    .estimate(column(1))
                    .theory(K::ConeCovariance, theory::cone_covariance(1.0 / n as f64, sigma2)),
                r.rec("covariance-half", seed)
                    .n(n)
                    .estimate(column(2))
                    .theory(K::ConeCovariance, theory::cone_covariance(0.5, sigma2)),
            ])
        })?;
    }
    Ok(())
}

fn free_energy(r: &mut Runner) -> Result<()> {
    let betas = r.cfg.betas();
    for n in r.cfg.ns() {
        r.cell(|r, seed| {
            let lattice = r.lattice(n)?;
            let sampler = SpectralSampler::full(lattice)?;
            let curve = free_energy_curve(&sampler, &betas, r.cfg.field_budget, seed);
            Ok(betas
                .iter()
                .zip(curve)
                .map(|(&beta, e)| {
                    r.rec("free-energy", seed)
                        .n(n)
                        .beta(beta)
                        .estimate(e)
                        .theory(K::RemFreeEnergy, theory::rem_free_energy(beta, lattice.sigma2()))
                })
                .collect())
        })?;
    }
    r.verdicts("free-energy", |x| x.beta.map(f64::to_bits));
    Ok(())
}

fn overlap_cdf(r: &mut Runner) -> Result<()> {
    let q_grid = r.cfg.q_grid.clone();
    let budget = ReplicaBudget::new(r.cfg.field_budget, r.cfg.replica_budget)?;
    for n in r.cfg.ns() {
        for beta in r.cfg.betas() {
            r.cell(|r, seed| {
                let lattice = r.lattice(n)?;
                let sampler = SpectralSampler::full(lattice)?;
                let b = beta * lattice.sigma();
                let cdf = overlap_cdf_estimate(&sampler, beta, &q_grid, r.cfg.field_budget, seed)?;
                let mut rows: Vec<ResultRecord> = q_grid
                    .iter()
                    .zip(cdf)
                    .map(|(&q, e)| {
                        r.rec("overlap-cdf", seed)
                            .n(n)
                            .beta(beta)
                            .q(q)
                            .estimate(e)
                            .theory(K::OverlapCdfLimit, theory::overlap_cdf_limit_any(b, q))
                    })
                    .collect();
                let mean = pair_functional_estimate(&sampler, beta, |q| q, r.cfg.field_budget, seed);
                rows.push(
                    r.rec("mean-overlap", seed)
                        .n(n)
                        .beta(beta)
                        .estimate(mean)
                        .theory(K::OverlapCdfLimit, theory::mean_overlap_limit(b)),
                );
                let ultra = overlap_functional_estimate(&sampler, beta, 3, &ultrametric_indicator, budget, seed)?;
                rows.push(
                    r.rec("ultrametricity", seed)
                        .n(n)
                        .beta(beta)
                        .estimate(ultra)
                        .theory(K::Ultrametricity, theory::ULTRAMETRIC_LIMIT),
                );
                Ok(rows)
            })?;
        }
    }
    r.verdicts("overlap-cdf", |x| Some((x.beta?.to_bits(), x.q?.to_bits())));
    r.verdicts("ultrametricity", |x| x.beta.map(f64::to_bits));
    Ok(())
}

/// Two-scale spec when both sigmas are configured, else `None`.
fn optional_perturbation(cfg: &ExperimentConfig, lattice: LatticeSpec) -> Result<Option<PerturbationSpec>> {
    match (cfg.sigma1, cfg.sigma2) {
        (Some(s1), Some(s2)) => {
            let alpha = cfg.alphas().first().copied().unwrap_or(0.5);
            Ok(Some(PerturbationSpec::new(lattice, s1, s2, alpha)?))
        }
        _ => Ok(None),
    }
}

fn high_points(r: &mut Runner) -> Result<()> {
    let gammas = r.cfg.gammas.clone();
    for n in r.cfg.ns() {
        for &gamma in &gammas {
            r.cell(|r, seed| {
                let lattice = r.lattice(n)?;
                let perturbation = optional_perturbation(r.cfg, lattice)?;
                let summary = match &perturbation {
                    Some(spec) => high_point_estimate(&TwoScaleSampler::new(*spec)?, gamma, r.cfg.field_budget, seed),
                    None => high_point_estimate(&SpectralSampler::full(lattice)?, gamma, r.cfg.field_budget, seed),
                };
                let sigma = lattice.sigma();
                let (s1, s2, a) = perturbation.map_or((1.0, 1.0, 0.5), |p| (p.sigma1(), p.sigma2(), p.rounded_alpha()));
                let limit = theory::high_point_exponent(gamma, sigma * s1, sigma * s2, a).ok();
                let base = |metric: &str| {
                    let rec = r.rec(metric, seed).n(n).gamma(gamma);
                    match perturbation {
                        Some(p) => rec.sigmas(s1, s2).alpha(p.alpha()).rounded_alpha(a),
                        None => rec,
                    }
                };
                Ok(vec![
                    base("high-point-exponent")
                        .estimate(summary.exponent)
                        .theory_opt(K::HighPointExponent, limit),
                    base("mean-count").value(summary.mean_count),
                    base("empty-fields").value(summary.empty_fields as f64),
                ])
            })?;
        }
    }
    r.verdicts("high-point-exponent", |x| x.gamma.map(f64::to_bits));
    Ok(())
}

fn perturbed_free_energy(r: &mut Runner) -> Result<()> {
    let betas = r.cfg.betas();
    let (s1, s2) = (r.cfg.sigma1.expect("validated"), r.cfg.sigma2.expect("validated"));
    for n in r.cfg.ns() {
        for alpha in r.cfg.alphas() {
            r.cell(|r, seed| {
                let lattice = r.lattice(n)?;
                let spec = PerturbationSpec::new(lattice, s1, s2, alpha)?;
                let sampler = TwoScaleSampler::new(spec)?;
                let a = spec.rounded_alpha();
                let sigma = lattice.sigma();
                let curve = free_energy_curve(&sampler, &betas, r.cfg.field_budget, seed);
                let base = |metric: &str, beta: f64| {
                    r.rec(metric, seed)
                        .n(n)
                        .beta(beta)
                        .sigmas(s1, s2)
                        .alpha(alpha)
                        .rounded_alpha(a)
                };
                let mut rows = Vec::new();
                for (&beta, e) in betas.iter().zip(curve) {
                    let limit = theory::perturbed_free_energy(beta, sigma * s1, sigma * s2, a);
                    rows.push(
                        base("free-energy", beta)
                            .estimate(e)
                            .theory(K::PerturbedFreeEnergy, limit),
                    );
                    let (_, sup) = theory::p_beta_max(beta, sigma * s1, sigma * s2, a);
                    rows.push(
                        base("p-beta-max", beta)
                            .value(sup)
                            .theory(K::PerturbedFreeEnergy, limit),
                    );
                }
                rows.push(
                    r.rec("case", seed)
                        .n(n)
                        .sigmas(s1, s2)
                        .alpha(alpha)
                        .rounded_alpha(a)
                        .value(spec.case().tag() as f64),
                );
                Ok(rows)
            })?;
        }
    }
    r.verdicts("free-energy", |x| Some((x.beta?.to_bits(), x.alpha?.to_bits())));
    Ok(())
}

fn bk_check(r: &mut Runner) -> Result<()> {
    let u = r.cfg.u;
    for n in r.cfg.ns() {
        for beta in r.cfg.betas() {
            for alpha in r.cfg.alphas() {
                r.cell(|r, seed| {
                    let lattice = r.lattice(n)?;
                    let spec = PerturbationSpec::bk(lattice, alpha, u)?;
                    let a = spec.rounded_alpha();
                    let fields = r.cfg.field_budget;
                    // Closed forms are for the unit-variance lattice.
                    let unit = lattice.sigma() == 1.0;
                    let limit = unit.then(|| theory::bk_derivative(beta, a, u) / beta);
                    let base = |metric: &str| {
                        r.rec(metric, seed)
                            .n(n)
                            .beta(beta)
                            .sigmas(spec.sigma1(), spec.sigma2())
                            .alpha(alpha)
                            .rounded_alpha(a)
                            .u(u)
                    };
                    let mut rows = Vec::new();
                    if u == 0.0 {
                        let check = bk_cross_check(&spec, beta, fields, seed)?;
                        let integral = unit.then(|| theory::overlap_tail_integral(beta, a));
                        rows.push(
                            base("covariance-route")
                                .estimate(check.covariance_route)
                                .theory_opt(K::BkDerivative, limit),
                        );
                        rows.push(
                            base("replica-route")
                                .estimate(check.replica_route)
                                .theory_opt(K::BkDerivative, integral),
                        );
                        rows.push(
                            base("route-difference")
                                .estimate(check.difference)
                                .theory(K::OracleAgreement, 0.0),
                        );
                        rows.push(base("finite-size-slack").value(2.0 / lattice.log_n()));
                    } else {
                        let lhs = bk_derivative_lhs(&spec, beta, fields, seed)?;
                        rows.push(
                            base("covariance-route")
                                .estimate(lhs)
                                .theory_opt(K::BkDerivative, limit),
                        );
                    }
                    let fd = bk_derivative_fd(&spec, beta, FD_STEP, fields, seed)?;
                    rows.push(
                        base("finite-difference")
                            .estimate(fd)
                            .theory_opt(K::BkDerivative, limit),
                    );
                    Ok(rows)
                })?;
            }
        }
    }
    Ok(())
}

fn gg_functional(kind: GgFunctional) -> fn(&OverlapMatrix) -> f64 {
    match kind {
        GgFunctional::One => |_| 1.0,
        GgFunctional::Q12 => |m| m.get(0, 1),
        GgFunctional::HalfIndicator => |m| f64::from(u8::from(m.get(0, 1) <= 0.5)),
    }
}

fn gg_check(r: &mut Runner) -> Result<()> {
    let f = gg_functional(r.cfg.gg_functional);
    let s = r.cfg.replicas;
    let budget = ReplicaBudget::new(r.cfg.field_budget, r.cfg.replica_budget)?;
    for n in r.cfg.ns() {
        for beta in r.cfg.betas() {
            r.cell(|r, seed| {
                let sampler = SpectralSampler::full(r.lattice(n)?)?;
                let g = gg_residual(&sampler, beta, s, &f, budget, seed)?;
                Ok(vec![
                    r.rec("gg-residual", seed)
                        .n(n)
                        .beta(beta)
                        .estimate(g.residual)
                        .theory(K::GhirlandaGuerra, 0.0),
                    r.rec("gg-lhs", seed).n(n).beta(beta).value(g.lhs),
                    r.rec("gg-rhs", seed).n(n).beta(beta).value(g.rhs),
                    r.rec("finite-size-scale", seed).n(n).beta(beta).value(g.scale),
                ])
            })?;
        }
    }
    r.verdicts("gg-residual", |x| x.beta.map(f64::to_bits));
    Ok(())
}

fn pd_moments(r: &mut Runner) -> Result<()> {
    let specs: Vec<MomentSpec> = (1..=r.cfg.max_order).flat_map(MomentSpec::compositions).collect();
    for alpha in r.cfg.alphas() {
        r.cell(|r, seed| {
            let budget = PdBudget::adaptive(alpha, r.cfg.pd_sample_budget);
            let moments = moment_estimates(alpha, &specs, budget, seed)?;
            let residuals = recursion_residuals(alpha, &specs, budget, child_seed(seed, 1))?;
            let mut rows = vec![
                r.rec("atoms", seed).alpha(alpha).value(budget.atoms as f64),
                r.rec("tail-square-bound", seed)
                    .alpha(alpha)
                    .value(tail_square_estimate(alpha, budget.atoms)),
            ];
            for (spec, e) in specs.iter().zip(moments) {
                rows.push(
                    r.rec(format!("moment{spec}"), seed)
                        .alpha(alpha)
                        .estimate(e)
                        .theory(K::PdMoment, theory::pd_moment(alpha, spec.exponents())),
                );
            }
            for (spec, e) in specs.iter().zip(residuals) {
                rows.push(
                    r.rec(format!("recursion{spec}"), seed)
                        .alpha(alpha)
                        .estimate(e)
                        .theory(K::GhirlandaGuerra, 0.0),
                );
            }
            Ok(rows)
        })?;
    }
    Ok(())
}

fn half_indicator(m: &OverlapMatrix) -> f64 {
    f64::from(u8::from(m.get(0, 1) <= 0.5))
}

fn pd_bridge(r: &mut Runner) -> Result<()> {
    let sigma = r.cfg.sigma;
    for beta in r.cfg.betas() {
        let alpha = theory::BETA_C / (sigma * beta);
        let mut pd: Option<Estimate> = None;
        if alpha < 1.0 {
            r.cell(|r, seed| {
                let budget = PdBudget::adaptive(alpha, r.cfg.pd_sample_budget);
                let e = pd_functional(alpha, 2, &half_indicator, budget, 0, seed)?;
                pd = Some(e);
                let exact = 1.0 - theory::pd_moment(alpha, &[2]);
                Ok(vec![r
                    .rec("pd-estimate", seed)
                    .beta(beta)
                    .alpha(alpha)
                    .estimate(e)
                    .theory(K::PdFunctional, exact)])
            })?;
        }
        for n in r.cfg.ns() {
            r.cell(|r, seed| {
                let sampler = SpectralSampler::full(r.lattice(n)?)?;
                let g = pair_functional_estimate(
                    &sampler,
                    beta,
                    |q| f64::from(u8::from(q <= 0.5)),
                    r.cfg.field_budget,
                    seed,
                );
                let limit = theory::overlap_cdf_limit_any(sigma * beta, 0.5);
                let mut rows = vec![r
                    .rec("gibbs-estimate", seed)
                    .n(n)
                    .beta(beta)
                    .estimate(g)
                    .theory(K::OverlapCdfLimit, limit)];
                if let Some(p) = pd {
                    let diff = Estimate {
                        mean: (g.mean - p.mean).abs(),
                        se: g.se.hypot(p.se),
                        samples: g.samples,
                    };
                    rows.push(
                        r.rec("abs-gap", seed)
                            .n(n)
                            .beta(beta)
                            .alpha(alpha)
                            .estimate(diff)
                            .theory(K::PdFunctional, 0.0),
                    );
                }
                Ok(rows)
            })?;
        }
    }
    r.verdicts("abs-gap", |x| x.beta.map(f64::to_bits));
    r.verdicts("gibbs-estimate", |x| x.beta.map(f64::to_bits));
    Ok(())
}

fn slepian_check(r: &mut Runner) -> Result<()> {
    let (s1, s2) = (r.cfg.sigma1.expect("validated"), r.cfg.sigma2.expect("validated"));
    for n in r.cfg.ns() {
        for alpha in r.cfg.alphas() {
            r.cell(|r, seed| {
                let lattice = r.lattice(n)?;
                let spec = PerturbationSpec::new(lattice, s1, s2, alpha)?;
                let a = spec.rounded_alpha();
                let base = |metric: &str| r.rec(metric, seed).n(n).sigmas(s1, s2).alpha(alpha).rounded_alpha(a);
                let tree = HierarchicalSampler::new(spec).map_err(|e| HarnessError::config("alpha", e))?;
                let mut rows = Vec::new();
                if n <= SLEPIAN_ANALYTIC_MAX_N {
                    let (cov, var) = comparison_violation(&tree);
                    let scale = spec.variance().max(1.0);
                    if cov > ORACLE_TOLERANCE * scale || var > ORACLE_TOLERANCE * scale {
                        return Err(HarnessError::Oracle {
                            check: "slepian-check".into(),
                            detail: format!("comparison field violates domination: covariance excess {cov}, variance mismatch {var}"),
                        });
                    }
                    rows.push(base("covariance-excess").value(cov).theory(K::SlepianDomination, 0.0));
                    rows.push(base("variance-mismatch").value(var).theory(K::SlepianDomination, 0.0));
                }
                let gammas = if r.cfg.gammas.is_empty() {
                    let top = theory::gamma_max(lattice.sigma() * s1, lattice.sigma() * s2, a);
                    let (lo, hi, k) = SLEPIAN_LEVELS;
                    (0..k).map(|i| top * (lo + (hi - lo) * i as f64 / (k - 1) as f64)).collect()
                } else {
                    r.cfg.gammas.clone()
                };
                let lambdas: Vec<f64> = gammas.iter().map(|g| SQRT_2 * g * lattice.log_n()).collect();
                let tails = slepian_tails(&spec, &lambdas, r.cfg.field_budget, seed)?;
                for (&gamma, t) in gammas.iter().zip(tails) {
                    rows.push(base("tail-two-scale").gamma(gamma).estimate(t.two_scale));
                    rows.push(base("tail-hierarchical").gamma(gamma).estimate(t.hierarchical));
                    rows.push(
                        base("domination-excess")
                            .gamma(gamma)
                            .value(t.excess(DOMINATION_SE))
                            .theory(K::SlepianDomination, 0.0),
                    );
                }
                Ok(rows)
            })?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances_cover_the_half_circle() {
        assert_eq!(oracle_distances(16), (0..=8).collect::<Vec<_>>());
        let d = oracle_distances(1 << 16);
        assert_eq!(d.len(), ORACLE_DISTANCES);
        assert_eq!((d[0], d[d.len() - 1]), (0, 1 << 15));
    }

    #[test]
    fn shrinking_gaps() {
        assert!(gaps_shrink(&[(0.5, 0.01), (0.4, 0.01), (0.3, 0.01)]));
        assert!(gaps_shrink(&[(0.5, 0.01), (0.51, 0.01), (0.3, 0.01)]));
        assert!(!gaps_shrink(&[(0.5, 0.01), (0.6, 0.01), (0.3, 0.01)]));
        assert!(!gaps_shrink(&[(0.5, 0.01), (0.51, 0.01), (0.52, 0.01)]));
    }

    #[test]
    fn oracle_passes_small_lattices() {
        for n in [4, 64, 1000] {
            assert!(covariance_oracle(LatticeSpec::unit(n).unwrap()).unwrap().passes());
        }
    }
}
