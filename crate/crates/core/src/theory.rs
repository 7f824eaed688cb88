//! Closed-form limits: REM and two-level free energies, maxima, high-point
//! exponents, the low-temperature overlap distribution and Poisson–Dirichlet
//! moments.

use std::collections::HashMap;
use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};

/// Critical inverse temperature of the unit-variance field.
pub const BETA_C: f64 = SQRT_2;

/// Variance of the full-band field, `sigma² (log N + 1 - log 2)`.
pub fn cone_variance(n: usize, sigma2: f64) -> f64 {
    sigma2 * ((n as f64).ln() + 1.0 - 2f64.ln())
}

/// Covariance of the full-band field at circle distance `ell` in
/// `[1/N, 1/2]`, `sigma² (log(1/ell) - log 2)`.
pub fn cone_covariance(ell: f64, sigma2: f64) -> f64 {
    sigma2 * (-ell.ln() - 2f64.ln())
}

/// Limit of `E G^{x3}{q12 >= min(q13, q23)}`.
pub const ULTRAMETRIC_LIMIT: f64 = 1.0;

/// Critical inverse temperature of a REM with variance `sigma2 log N`.
pub fn beta_c(sigma2: f64) -> f64 {
    SQRT_2 / sigma2.sqrt()
}

/// Free energy of `N` i.i.d. Gaussians of variance `sigma2 log N`, per `log N`.
pub fn rem_free_energy(beta: f64, sigma2: f64) -> f64 {
    if beta <= beta_c(sigma2) {
        1.0 + beta * beta * sigma2 / 2.0
    } else {
        SQRT_2 * sigma2.sqrt() * beta
    }
}

/// Which regime of the two-level field a parameter set falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationCase {
    /// `sigma1 <= sigma2`: behaves as a REM with variance `V12`.
    Reduced,
    /// `sigma1 > sigma2`: a genuine two-level GREM.
    TwoLevel,
}

impl PerturbationCase {
    pub fn of(sigma1: f64, sigma2: f64) -> Self {
        if sigma1 <= sigma2 {
            Self::Reduced
        } else {
            Self::TwoLevel
        }
    }

    /// 1 for the reduced case, 2 otherwise.
    pub fn tag(self) -> u8 {
        match self {
            Self::Reduced => 1,
            Self::TwoLevel => 2,
        }
    }
}

/// `V12 = sigma1² alpha + sigma2² (1 - alpha)`.
pub fn v12(sigma1: f64, sigma2: f64, alpha: f64) -> f64 {
    sigma1 * sigma1 * alpha + sigma2 * sigma2 * (1.0 - alpha)
}

pub fn perturbed_free_energy(beta: f64, sigma1: f64, sigma2: f64, alpha: f64) -> f64 {
    match PerturbationCase::of(sigma1, sigma2) {
        PerturbationCase::Reduced => rem_free_energy(beta, v12(sigma1, sigma2, alpha)),
        PerturbationCase::TwoLevel => {
            alpha * rem_free_energy(beta, sigma1 * sigma1) + (1.0 - alpha) * rem_free_energy(beta, sigma2 * sigma2)
        }
    }
}

/// Limit of `max Y / (sqrt 2 log N)`.
pub fn gamma_max(sigma1: f64, sigma2: f64, alpha: f64) -> f64 {
    match PerturbationCase::of(sigma1, sigma2) {
        PerturbationCase::Reduced => v12(sigma1, sigma2, alpha).sqrt(),
        PerturbationCase::TwoLevel => sigma1 * alpha + sigma2 * (1.0 - alpha),
    }
}

/// Level `V12/sigma1` where the two-level exponent changes branch.
pub fn gamma_crit(sigma1: f64, sigma2: f64, alpha: f64) -> f64 {
    v12(sigma1, sigma2, alpha) / sigma1
}

/// Exponent of the number of `gamma`-high points, without domain checks.
/// Defined on `[0, gamma_max]`.
fn exponent_unchecked(gamma: f64, sigma1: f64, sigma2: f64, alpha: f64) -> f64 {
    let v = v12(sigma1, sigma2, alpha);
    match PerturbationCase::of(sigma1, sigma2) {
        PerturbationCase::Reduced => 1.0 - gamma * gamma / v,
        PerturbationCase::TwoLevel => {
            if gamma < v / sigma1 {
                1.0 - gamma * gamma / v
            } else {
                let d = gamma - sigma1 * alpha;
                (1.0 - alpha) - d * d / (sigma2 * sigma2 * (1.0 - alpha))
            }
        }
    }
}

/// Limit of `log |H_N(gamma)| / log N` for the two-level field.
pub fn high_point_exponent(gamma: f64, sigma1: f64, sigma2: f64, alpha: f64) -> Result<f64> {
    let gmax = gamma_max(sigma1, sigma2, alpha);
    if !(gamma > 0.0 && gamma < gmax) {
        return Err(Error::InvalidParameter(format!("gamma {gamma} outside (0, {gmax})")));
    }
    Ok(exponent_unchecked(gamma, sigma1, sigma2, alpha))
}

/// Limit of `E G^{x2}{q12 <= q}` for `beta > beta_c`.
pub fn overlap_cdf_limit(beta: f64, q: f64) -> Result<f64> {
    if beta <= BETA_C {
        return Err(Error::InvalidParameter(format!(
            "overlap limit is two-valued only above beta_c = sqrt 2, got beta = {beta}; \
             use overlap_cdf_limit_any for the degenerate high-temperature branch"
        )));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("q = {q} outside [0, 1]")));
    }
    Ok(if q < 1.0 { BETA_C / beta } else { 1.0 })
}

/// Overlap cdf limit at any `beta`; for `beta <= beta_c` the overlap is 0
/// almost surely, so the cdf is identically 1 on `[0, 1]`.
pub fn overlap_cdf_limit_any(beta: f64, q: f64) -> f64 {
    if beta <= BETA_C {
        1.0
    } else {
        overlap_cdf_limit(beta, q).unwrap_or(f64::NAN)
    }
}

/// Limit of `E G^{x2}[q12]`: `1 - beta_c/beta` above `beta_c`, 0 below.
pub fn mean_overlap_limit(beta: f64) -> f64 {
    if beta <= BETA_C {
        0.0
    } else {
        1.0 - BETA_C / beta
    }
}

/// Side from which the derivative in `u` is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// `d/du f^{(u, alpha)}(beta)` for the field `X + u (X - X(alpha))`, valid
/// while `beta` exceeds every critical value of the perturbed model.
pub fn bk_derivative(beta: f64, alpha: f64, u: f64) -> f64 {
    if u > 0.0 {
        let s = 1.0 + u;
        SQRT_2 * beta * (1.0 - alpha) * s / (alpha + (1.0 - alpha) * s * s).sqrt()
    } else {
        SQRT_2 * beta * (1.0 - alpha)
    }
}

/// One-sided derivative at `u = 0`; both sides equal `sqrt 2 beta (1 - alpha)`.
pub fn bk_derivative_limit(beta: f64, alpha: f64, side: Side) -> f64 {
    match side {
        Side::Plus => bk_derivative(beta, alpha, f64::MIN_POSITIVE),
        Side::Minus => bk_derivative(beta, alpha, 0.0),
    }
}

/// `beta ∫_alpha^1 x_beta(s) ds` for the limiting overlap law.
pub fn overlap_tail_integral(beta: f64, alpha: f64) -> f64 {
    beta * (1.0 - alpha) * (BETA_C / beta).min(1.0)
}

/// Maximizer and maximum of `E(gamma) + sqrt 2 beta gamma` over `[0, gamma_max]`.
pub fn p_beta_max(beta: f64, sigma1: f64, sigma2: f64, alpha: f64) -> (f64, f64) {
    let gmax = gamma_max(sigma1, sigma2, alpha);
    let v = v12(sigma1, sigma2, alpha);
    let p = |g: f64| exponent_unchecked(g, sigma1, sigma2, alpha) + SQRT_2 * beta * g;

    // branch 1 on [0, min(gamma_crit, gmax)]: 1 - g²/V + sqrt2 beta g
    let upper1 = match PerturbationCase::of(sigma1, sigma2) {
        PerturbationCase::Reduced => gmax,
        PerturbationCase::TwoLevel => gamma_crit(sigma1, sigma2, alpha).min(gmax),
    };
    let g1 = (beta * v / SQRT_2).clamp(0.0, upper1);
    let mut best = (g1, 1.0 - g1 * g1 / v + SQRT_2 * beta * g1);

    if PerturbationCase::of(sigma1, sigma2) == PerturbationCase::TwoLevel {
        let lower2 = gamma_crit(sigma1, sigma2, alpha);
        let g2 = (sigma1 * alpha + beta * sigma2 * sigma2 * (1.0 - alpha) / SQRT_2).clamp(lower2, gmax);
        let v2 = p(g2);
        if v2 > best.1 {
            best = (g2, v2);
        }
    }
    best
}

/// Poisson–Dirichlet moment `S(n_1, ..., n_m) = E Σ_{k_1..k_m} ξ^{n_1}...ξ^{n_m}`
/// for parameter `alpha`, obtained from `S(2) = 1 - alpha` through the
/// Ghirlanda–Guerra recursion.
pub fn pd_moment(alpha: f64, exponents: &[u32]) -> f64 {
    let mut memo = HashMap::new();
    pd_moment_memo(1.0 - alpha, exponents.to_vec(), &mut memo)
}

fn pd_moment_memo(s2: f64, mut exps: Vec<u32>, memo: &mut HashMap<Vec<u32>, f64>) -> f64 {
    assert!(!exps.is_empty() && exps.iter().all(|&e| e >= 1));
    // the moment is symmetric in its arguments; put the largest first so
    // that the recursion always lowers it
    exps.sort_unstable_by(|a, b| b.cmp(a));
    if exps.iter().all(|&e| e == 1) {
        return 1.0;
    }
    if let Some(&v) = memo.get(&exps) {
        return v;
    }
    // S(n1+1, rest) with n1 = exps[0] - 1
    let n1 = exps[0] - 1;
    let mut base = exps.clone();
    base[0] = n1;
    let s = base.iter().sum::<u32>() as f64;
    let s_base = pd_moment_memo(s2, base.clone(), memo);
    let mut value = (s2 / s) * s_base + (n1 as f64 - 1.0) / s * s_base;
    for l in 1..base.len() {
        let mut merged: Vec<u32> = Vec::with_capacity(base.len() - 1);
        merged.push(n1 + base[l]);
        merged.extend(
            base.iter()
                .enumerate()
                .skip(1)
                .filter(|&(j, _)| j != l)
                .map(|(_, &e)| e),
        );
        value += base[l] as f64 / s * pd_moment_memo(s2, merged, memo);
    }
    memo.insert(exps, value);
    value
}

/// Kind of limiting quantity, for tagging harness output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionKind {
    RemFreeEnergy,
    PerturbedFreeEnergy,
    GammaMax,
    HighPointExponent,
    OverlapCdfLimit,
    BkDerivative,
    PBetaCurve,
    PdMoment,
    PdFunctional,
    GhirlandaGuerra,
    Ultrametricity,
    ConeCovariance,
    OracleAgreement,
    SlepianDomination,
}

impl PredictionKind {
    pub fn tag(self) -> &'static str {
        match self {
            Self::RemFreeEnergy => "rem-free-energy",
            Self::PerturbedFreeEnergy => "perturbed-free-energy",
            Self::GammaMax => "gamma-max",
            Self::HighPointExponent => "high-point-exponent",
            Self::OverlapCdfLimit => "overlap-cdf-limit",
            Self::BkDerivative => "bk-derivative",
            Self::PBetaCurve => "p-beta-curve",
            Self::PdMoment => "pd-moment",
            Self::PdFunctional => "pd-functional",
            Self::GhirlandaGuerra => "ghirlanda-guerra",
            Self::Ultrametricity => "ultrametricity",
            Self::ConeCovariance => "cone-covariance",
            Self::OracleAgreement => "oracle-agreement",
            Self::SlepianDomination => "slepian-domination",
        }
    }
}

/// A closed-form limit together with what produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryPrediction {
    pub kind: PredictionKind,
    pub value: f64,
}

impl TheoryPrediction {
    pub fn new(kind: PredictionKind, value: f64) -> Self {
        Self { kind, value }
    }
}
