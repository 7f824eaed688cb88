//! Two-scale perturbed fields and the hierarchical comparison field.
//!
//! `Y_x = sigma1 X_x(alpha) + sigma2 (X_x - X_x(alpha))`, where `X(alpha)` is
//! the part of the field coming from heights above `eps^alpha`. The coarse
//! lattice has `round(N^alpha)` sites and the strip boundary sits exactly at
//! `1/coarse`, so every quantity uses the realized exponent
//! `log(coarse)/log N` rather than the requested one.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::field::kernel::{strip_covariance, HeightBand};
use crate::field::lattice::{circle_distance, LatticeSpec};
use crate::field::spectral::{FieldSample, FieldSource, SpectralSampler};
use crate::gibbs::{pair_functional_estimate, GibbsEnsemble, PairOverlapLaw};
use crate::stats::{par_tasks, Estimate};
use crate::theory::PerturbationCase;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    lattice: LatticeSpec,
    sigma1: f64,
    sigma2: f64,
    alpha: f64,
    coarse: usize,
}

impl PerturbationSpec {
    pub fn new(lattice: LatticeSpec, sigma1: f64, sigma2: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} outside (0, 1)")));
        }
        for (name, s) in [("sigma1", sigma1), ("sigma2", sigma2)] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {s} must be positive")));
            }
        }
        let n = lattice.n();
        let coarse = ((n as f64).powf(alpha).round() as usize).clamp(1, n);
        Ok(Self {
            lattice,
            sigma1,
            sigma2,
            alpha,
            coarse,
        })
    }

    /// The Bovier–Kurkova family `sigma = (1, 1 + u)`.
    pub fn bk(lattice: LatticeSpec, alpha: f64, u: f64) -> Result<Self> {
        Self::new(lattice, 1.0, 1.0 + u, alpha)
    }

    pub fn lattice(&self) -> LatticeSpec {
        self.lattice
    }

    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Requested exponent.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Exponent realized by the coarse lattice, `log(coarse)/log N`.
    pub fn rounded_alpha(&self) -> f64 {
        (self.coarse as f64).ln() / self.lattice.log_n()
    }

    /// Number of coarse sites.
    pub fn coarse_sites(&self) -> usize {
        self.coarse
    }

    pub fn case(&self) -> PerturbationCase {
        PerturbationCase::of(self.sigma1, self.sigma2)
    }

    /// `V12` at the realized exponent.
    pub fn v12(&self) -> f64 {
        crate::theory::v12(self.sigma1, self.sigma2, self.rounded_alpha())
    }

    /// `[1/coarse, ∞)`, the strip carrying `X(alpha)`.
    pub fn top_band(&self) -> HeightBand {
        HeightBand::above(1.0 / self.coarse as f64).expect("coarse spacing is positive")
    }

    /// `[1/N, 1/coarse)`, the strip carrying `X - X(alpha)`.
    pub fn bottom_band(&self) -> HeightBand {
        HeightBand::new(self.lattice.eps(), 1.0 / self.coarse as f64).expect("coarse <= n")
    }

    /// Analytic `E[Y_x Y_y]`.
    pub fn covariance(&self, x: usize, y: usize) -> f64 {
        let ell = circle_distance(x, y, self.lattice.n());
        let s2 = self.lattice.sigma2();
        self.sigma1 * self.sigma1 * strip_covariance(ell, &self.top_band(), s2)
            + self.sigma2 * self.sigma2 * strip_covariance(ell, &self.bottom_band(), s2)
    }

    /// Analytic `Var(Y_x)`.
    pub fn variance(&self) -> f64 {
        self.covariance(0, 0)
    }
}

/// Independent top and bottom strips and their combination.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleSample {
    /// `X(alpha)`, band `[eps^alpha, ∞)`.
    pub top: FieldSample,
    /// `X - X(alpha)`, band `[eps, eps^alpha)`.
    pub bottom: FieldSample,
    /// `sigma1 top + sigma2 bottom`.
    pub combined: Vec<f64>,
}

impl TwoScaleSample {
    /// Unperturbed field `X = top + bottom`.
    pub fn unperturbed(&self) -> Vec<f64> {
        self.top
            .values
            .iter()
            .zip(&self.bottom.values)
            .map(|(t, b)| t + b)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TwoScaleSampler {
    spec: PerturbationSpec,
    top: SpectralSampler,
    bottom: SpectralSampler,
}

impl TwoScaleSampler {
    pub fn new(spec: PerturbationSpec) -> Result<Self> {
        Ok(Self {
            spec,
            top: SpectralSampler::new(spec.lattice, spec.top_band())?,
            bottom: SpectralSampler::new(spec.lattice, spec.bottom_band())?,
        })
    }

    pub fn spec(&self) -> &PerturbationSpec {
        &self.spec
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TwoScaleSample {
        let top = self.top.sample_field(rng);
        let bottom = self.bottom.sample_field(rng);
        let (s1, s2) = (self.spec.sigma1, self.spec.sigma2);
        let combined = top
            .values
            .iter()
            .zip(&bottom.values)
            .map(|(t, b)| s1 * t + s2 * b)
            .collect();
        TwoScaleSample { top, bottom, combined }
    }
}

impl FieldSource for TwoScaleSampler {
    fn lattice(&self) -> LatticeSpec {
        self.spec.lattice
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sample(rng).combined
    }
}

/// Samples the two-scale field; see [`TwoScaleSampler`].
pub fn sample_two_scale<R: Rng + ?Sized>(spec: PerturbationSpec, rng: &mut R) -> Result<TwoScaleSample> {
    Ok(TwoScaleSampler::new(spec)?.sample(rng))
}

/// Nearest coarse site to fine site `x`; a fine site exactly halfway between
/// two coarse sites goes to the one on its right.
pub fn ancestor_map(x: usize, n: usize, coarse: usize) -> usize {
    debug_assert!(x < n && coarse >= 1);
    // round(x * coarse / n), halves rounded up, in integers
    let j = (2 * x as u128 * coarse as u128 + n as u128) / (2 * n as u128);
    (j as usize) % coarse
}

/// Distance from fine site `x` to coarse site `j`.
pub fn ancestor_distance(x: usize, n: usize, j: usize, coarse: usize) -> f64 {
    // |x/n - j/coarse| on the circle, in units of 1/(n coarse)
    let period = n as u128 * coarse as u128;
    let a = x as u128 * coarse as u128;
    let b = j as u128 * n as u128;
    let d = a.abs_diff(b) % period;
    d.min(period - d) as f64 / period as f64
}

/// `g1_{π(x)} + g2_x`, with `g1` living on the coarse lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalSample {
    pub ancestors: Vec<f64>,
    pub leaves: Vec<f64>,
    pub combined: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct HierarchicalSampler {
    spec: PerturbationSpec,
    ancestor_of: Vec<usize>,
    ancestor_sd: f64,
    leaf_sd: f64,
}

impl HierarchicalSampler {
    /// Variance of the coarse variables, `sigma² sigma1² (alpha log N - log 2 - 1)`.
    pub fn ancestor_variance(spec: &PerturbationSpec) -> f64 {
        let log_coarse = (spec.coarse as f64).ln();
        spec.lattice.sigma2() * spec.sigma1 * spec.sigma1 * (log_coarse - 2f64.ln() - 1.0)
    }

    /// Variance of the leaf variables, `sigma² (sigma2² (1 - alpha) log N + 2 sigma1²)`.
    pub fn leaf_variance(spec: &PerturbationSpec) -> f64 {
        let log_ratio = (spec.lattice.n() as f64 / spec.coarse as f64).ln();
        spec.lattice.sigma2() * (spec.sigma2 * spec.sigma2 * log_ratio + 2.0 * spec.sigma1 * spec.sigma1)
    }

    pub fn new(spec: PerturbationSpec) -> Result<Self> {
        let va = Self::ancestor_variance(&spec);
        if va <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "coarse variance {va} is not positive; N = {} is too small for alpha = {}",
                spec.lattice.n(),
                spec.alpha
            )));
        }
        let n = spec.lattice.n();
        let ancestor_of = (0..n).map(|x| ancestor_map(x, n, spec.coarse)).collect();
        Ok(Self {
            spec,
            ancestor_of,
            ancestor_sd: va.sqrt(),
            leaf_sd: Self::leaf_variance(&spec).sqrt(),
        })
    }

    pub fn spec(&self) -> &PerturbationSpec {
        &self.spec
    }

    pub fn ancestor_of(&self, x: usize) -> usize {
        self.ancestor_of[x]
    }

    /// Analytic `E[Ỹ_x Ỹ_y]`.
    pub fn covariance(&self, x: usize, y: usize) -> f64 {
        let shared = if self.ancestor_of[x] == self.ancestor_of[y] {
            self.ancestor_sd * self.ancestor_sd
        } else {
            0.0
        };
        if x == y {
            shared + self.leaf_sd * self.leaf_sd
        } else {
            shared
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> HierarchicalSample {
        let ancestors: Vec<f64> = (0..self.spec.coarse)
            .map(|_| self.ancestor_sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let leaves: Vec<f64> = (0..self.spec.lattice.n())
            .map(|_| self.leaf_sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let combined = leaves
            .iter()
            .zip(&self.ancestor_of)
            .map(|(g2, &a)| ancestors[a] + g2)
            .collect();
        HierarchicalSample {
            ancestors,
            leaves,
            combined,
        }
    }
}

impl FieldSource for HierarchicalSampler {
    fn lattice(&self) -> LatticeSpec {
        self.spec.lattice
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sample(rng).combined
    }
}

pub fn sample_hierarchical<R: Rng + ?Sized>(spec: PerturbationSpec, rng: &mut R) -> Result<HierarchicalSample> {
    Ok(HierarchicalSampler::new(spec)?.sample(rng))
}

/// Largest value of `E[Ỹ_x Ỹ_y] - E[Y_x Y_y]` over `x != y`, and the largest
/// variance mismatch; the comparison holds when the first is `<= 0` and
/// the second is rounding noise.
pub fn comparison_violation(sampler: &HierarchicalSampler) -> (f64, f64) {
    let n = sampler.spec.lattice.n();
    let spec = sampler.spec;
    let mut worst_cov = f64::NEG_INFINITY;
    let mut worst_var: f64 = 0.0;
    for x in 0..n {
        worst_var = worst_var.max((sampler.covariance(x, x) - spec.variance()).abs());
        for y in (0..n).filter(|&y| y != x) {
            worst_cov = worst_cov.max(sampler.covariance(x, y) - spec.covariance(x, y));
        }
    }
    (worst_cov, worst_var)
}

/// Monte Carlo estimate of `(1/log N) E[Σ_x G(x) X̃_x]`, with `G` the Gibbs
/// measure of the spec's field and `X̃` its bottom strip. At
/// `sigma = (1, 1)` this is the covariance route to
/// `beta ∫_alpha^1 x_beta(s) ds`; in general it is
/// `(1/beta) d/d sigma2` of the free energy.
pub fn bk_derivative_lhs(spec: &PerturbationSpec, beta: f64, fields: usize, seed: u64) -> Result<Estimate> {
    let sampler = TwoScaleSampler::new(*spec)?;
    let log_n = spec.lattice.log_n();
    let values = par_tasks(fields, seed, |_, rng| {
        let sample = sampler.sample(rng);
        GibbsEnsemble::new(&sample.combined, beta).expect(&sample.bottom.values) / log_n
    });
    Ok(Estimate::from_samples(&values))
}

/// Replica route: `beta E G^{x2}[1 - max(q12, alpha)]`, which equals
/// `beta ∫_alpha^1 x_beta(s) ds`. Uses the realized exponent and sums the
/// replica pair exactly.
pub fn bk_replica_integral(spec: &PerturbationSpec, beta: f64, fields: usize, seed: u64) -> Result<Estimate> {
    let sampler = SpectralSampler::full(spec.lattice)?;
    let alpha = spec.rounded_alpha();
    Ok(pair_functional_estimate(
        &sampler,
        beta,
        |q| beta * (1.0 - q.max(alpha)),
        fields,
        seed,
    ))
}

/// Both routes on the same field draws, paired.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BkCrossCheck {
    pub covariance_route: Estimate,
    pub replica_route: Estimate,
    /// Paired difference `covariance - replica`.
    pub difference: Estimate,
}

/// Pairs the covariance route with the replica route on the same fields.
/// The two agree in the limit only for the unperturbed field.
pub fn bk_cross_check(spec: &PerturbationSpec, beta: f64, fields: usize, seed: u64) -> Result<BkCrossCheck> {
    let sampler = TwoScaleSampler::new(*spec)?;
    let law = PairOverlapLaw::new(spec.lattice.n());
    let log_n = spec.lattice.log_n();
    let alpha = spec.rounded_alpha();
    let pairs: Vec<(f64, f64)> = par_tasks(fields, seed, |_, rng| {
        let sample = sampler.sample(rng);
        let gibbs = GibbsEnsemble::new(&sample.combined, beta);
        let lhs = gibbs.expect(&sample.bottom.values) / log_n;
        let rhs = law.expect(&gibbs, |q| beta * (1.0 - q.max(alpha)));
        (lhs, rhs)
    });
    let (lhs, rhs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    Ok(BkCrossCheck {
        covariance_route: Estimate::from_samples(&lhs),
        replica_route: Estimate::from_samples(&rhs),
        difference: Estimate::from_samples(&diff),
    })
}

/// Finite-difference oracle: `(1/(beta log N)) d/d sigma2 E log Z` at the
/// spec's `sigma2`, by central differences at `±h` and `±h/2` with
/// Richardson extrapolation, using the same fields for every step.
pub fn bk_derivative_fd(spec: &PerturbationSpec, beta: f64, h: f64, fields: usize, seed: u64) -> Result<Estimate> {
    let sampler = TwoScaleSampler::new(*spec)?;
    let log_n = spec.lattice.log_n();
    let (s1, s2) = (spec.sigma1, spec.sigma2);
    let values = par_tasks(fields, seed, |_, rng| {
        let s = sampler.sample(rng);
        let log_z = |du: f64| {
            let y: Vec<f64> = s
                .top
                .values
                .iter()
                .zip(&s.bottom.values)
                .map(|(t, b)| s1 * t + (s2 + du) * b)
                .collect();
            crate::gibbs::log_partition(&y, beta)
        };
        let central = |step: f64| (log_z(step) - log_z(-step)) / (2.0 * step);
        let richardson = (4.0 * central(h / 2.0) - central(h)) / 3.0;
        richardson / (beta * log_n)
    });
    Ok(Estimate::from_samples(&values))
}

/// `P(max Y >= lambda)` and `P(max Ỹ >= lambda)` at one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailPair {
    pub lambda: f64,
    pub two_scale: Estimate,
    pub hierarchical: Estimate,
}

impl TailPair {
    /// `P(max Y >= λ) - P(max Ỹ >= λ)` minus `k` combined standard errors;
    /// positive values contradict domination.
    pub fn excess(&self, k: f64) -> f64 {
        let se = self.two_scale.se.hypot(self.hierarchical.se);
        self.two_scale.mean - self.hierarchical.mean - k * se
    }
}

/// Empirical maximum tails of the two-scale field and its hierarchical
/// comparison field, from independent draws.
pub fn slepian_tails(spec: &PerturbationSpec, lambdas: &[f64], fields: usize, seed: u64) -> Result<Vec<TailPair>> {
    let two_scale = TwoScaleSampler::new(*spec)?;
    let tree = HierarchicalSampler::new(*spec)?;
    let maxima = par_tasks(fields, seed, |_, rng| {
        let y = two_scale.draw(rng);
        let t = tree.draw(rng);
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (max(&y), max(&t))
    });
    Ok(lambdas
        .iter()
        .map(|&lambda| {
            let hit = |m: f64| if m >= lambda { 1.0 } else { 0.0 };
            let a: Vec<f64> = maxima.iter().map(|p| hit(p.0)).collect();
            let b: Vec<f64> = maxima.iter().map(|p| hit(p.1)).collect();
            TailPair {
                lambda,
                two_scale: Estimate::from_samples(&a),
                hierarchical: Estimate::from_samples(&b),
            }
        })
        .collect())
}
