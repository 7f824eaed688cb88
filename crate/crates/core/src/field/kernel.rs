//! Closed-form strip covariances of the cone construction.
//!
//! A site `x` sees the cone `{(s, y): |s - x| <= f(y)/2}` with
//! `f(y) = min(y, 1/2)`, under the measure `y^-2 ds dy`. Two cones whose
//! apexes sit at circle distance `ell` overlap on a width
//! `max(0, f(y) - ell)` at height `y`, so the covariance contributed by the
//! strip `lo <= y < hi` is
//!
//! ```text
//! sigma2 * ∫_lo^hi max(0, f(y) - ell) / y^2 dy
//! ```
//!
//! Below `y = 1/2` the antiderivative is `log y + ell/y`, above it is
//! `-(1/2 - ell)/y`.

use crate::error::{Error, Result};
use crate::field::lattice::LatticeSpec;

/// Horizontal strip `lo <= y < hi` of the half-cylinder; `hi` may be infinite.
///
/// `lo == hi` is accepted and denotes the empty strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightBand {
    lo: f64,
    hi: f64,
}

impl HeightBand {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || lo <= 0.0 {
            return Err(Error::InvalidBand {
                lo,
                hi,
                reason: "lower edge must be positive and finite",
            });
        }
        if hi.is_nan() || hi < lo {
            return Err(Error::InvalidBand {
                lo,
                hi,
                reason: "upper edge must not be below the lower edge",
            });
        }
        Ok(Self { lo, hi })
    }

    /// `[lo, ∞)`.
    pub fn above(lo: f64) -> Result<Self> {
        Self::new(lo, f64::INFINITY)
    }

    /// The band `[1/N, ∞)` realizing the full field.
    pub fn full(lattice: &LatticeSpec) -> Self {
        Self {
            lo: lattice.eps(),
            hi: f64::INFINITY,
        }
    }

    /// Band between scales `t_hi > t_lo`: `[eps^t_hi, eps^t_lo)`.
    pub fn between_scales(lattice: &LatticeSpec, t_lo: f64, t_hi: f64) -> Result<Self> {
        Self::new(lattice.height(t_hi), lattice.height(t_lo))
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }
}

/// `sigma2 * ∫_band max(0, min(y, 1/2) - ell) y^-2 dy` in closed form.
///
/// # Panics
/// If `ell` lies outside `[0, 1/2]`.
pub fn strip_covariance(ell: f64, band: &HeightBand, sigma2: f64) -> f64 {
    assert!((0.0..=0.5).contains(&ell), "circle distance {ell} outside [0, 1/2]");
    if band.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;

    let a = band.lo.max(ell);
    let b = band.hi.min(0.5);
    if b > a {
        total += (b / a).ln() - ell * (b - a) / (a * b);
    }

    let c = band.lo.max(0.5);
    if band.hi > c {
        let inv_hi = if band.hi.is_infinite() { 0.0 } else { 1.0 / band.hi };
        total += (0.5 - ell) * (1.0 / c - inv_hi);
    }
    sigma2 * total
}

/// Strip covariance as a function of circle distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceKernel {
    sigma2: f64,
    band: HeightBand,
}

impl CovarianceKernel {
    pub fn new(sigma2: f64, band: HeightBand) -> Result<Self> {
        if !sigma2.is_finite() || sigma2 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "kernel multiplier must be positive, got {sigma2}"
            )));
        }
        Ok(Self { sigma2, band })
    }

    pub fn band(&self) -> HeightBand {
        self.band
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn at(&self, ell: f64) -> f64 {
        strip_covariance(ell, &self.band, self.sigma2)
    }
}

/// First row of the circulant covariance matrix: entry `d` is the kernel at
/// distance `min(d, N-d)/N`.
pub fn build_covariance_matrix(lattice: &LatticeSpec, band: &HeightBand) -> Vec<f64> {
    let n = lattice.n();
    let sigma2 = lattice.sigma2();
    let half: Vec<f64> = (0..=n / 2)
        .map(|d| strip_covariance(d as f64 / n as f64, band, sigma2))
        .collect();
    (0..n).map(|d| half[d.min(n - d)]).collect()
}
