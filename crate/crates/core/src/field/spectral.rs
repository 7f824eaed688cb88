//! Exact sampling of stationary fields on the circle.
//!
//! A real symmetric circulant matrix `C` with first row `c` is diagonalized
//! by the discrete Fourier transform, with eigenvalues `λ_k = Σ_d c_d
//! e^{-2πi dk/N}`. For `Z` a vector of standard complex Gaussians,
//! `W = FFT(sqrt(λ/N) ∘ Z)` has `Re W` and `Im W` independent with
//! covariance `C`, at a cost of one length-`N` transform.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::kernel::{build_covariance_matrix, HeightBand};
use crate::field::lattice::LatticeSpec;

/// Relative clamp tolerance: eigenvalues in `[-τ, 0)` are treated as
/// rounding noise, with `τ = CLAMP_RELATIVE * max eigenvalue`.
pub const CLAMP_RELATIVE: f64 = 1e-9;

/// One realization of a Gaussian field on the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub values: Vec<f64>,
    pub lattice: LatticeSpec,
    pub band: HeightBand,
}

impl FieldSample {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Anything that can produce independent field realizations.
pub trait FieldSource: Sync {
    fn lattice(&self) -> LatticeSpec;

    /// One realization, as site values.
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64>;

    fn n(&self) -> usize {
        self.lattice().n()
    }

    fn log_n(&self) -> f64 {
        self.lattice().log_n()
    }
}

/// Negative eigenvalues set to zero at construction.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClampReport {
    pub count: usize,
    pub max_magnitude: f64,
}

#[derive(Clone)]
pub struct SpectralSampler {
    lattice: LatticeSpec,
    band: HeightBand,
    eigenvalues: Vec<f64>,
    amplitudes: Vec<f64>,
    clamp: ClampReport,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralSampler")
            .field("lattice", &self.lattice)
            .field("band", &self.band)
            .field("clamp", &self.clamp)
            .finish_non_exhaustive()
    }
}

/// Eigenvalues of the symmetric circulant matrix with first row `row`.
///
/// Returns the raw (unclamped) real parts, symmetrized under `k -> N-k`,
/// after checking that the imaginary parts are rounding noise.
pub fn circulant_eigenvalues(row: &[f64]) -> Result<Vec<f64>> {
    let n = row.len();
    let mut buf: Vec<Complex<f64>> = row.iter().map(|&r| Complex::new(r, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = buf
        .iter()
        .map(|z| z.re.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let worst_imag = buf.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if worst_imag > 1e-9 * scale.max(1.0) {
        return Err(Error::ComplexSpectrum(worst_imag));
    }
    Ok((0..n).map(|k| 0.5 * (buf[k].re + buf[(n - k) % n].re)).collect())
}

impl SpectralSampler {
    pub fn new(lattice: LatticeSpec, band: HeightBand) -> Result<Self> {
        let row = build_covariance_matrix(&lattice, &band);
        Self::from_row(lattice, band, &row)
    }

    /// Sampler of the full field `X` (band `[1/N, ∞)`).
    pub fn full(lattice: LatticeSpec) -> Result<Self> {
        Self::new(lattice, HeightBand::full(&lattice))
    }

    fn from_row(lattice: LatticeSpec, band: HeightBand, row: &[f64]) -> Result<Self> {
        let n = lattice.n();
        let mut eigenvalues = circulant_eigenvalues(row)?;
        let largest = eigenvalues.iter().copied().fold(0.0, f64::max);
        let tolerance = CLAMP_RELATIVE * largest;
        let mut clamp = ClampReport::default();
        for (index, value) in eigenvalues.iter_mut().enumerate() {
            if *value < -tolerance {
                return Err(Error::NotPositiveSemidefinite {
                    index,
                    value: *value,
                    tolerance,
                });
            }
            if *value < 0.0 {
                clamp.count += 1;
                clamp.max_magnitude = clamp.max_magnitude.max(-*value);
                *value = 0.0;
            }
        }
        let amplitudes = eigenvalues.iter().map(|&l| (l / n as f64).sqrt()).collect();
        let fft = FftPlanner::new().plan_fft_forward(n);
        Ok(Self {
            lattice,
            band,
            eigenvalues,
            amplitudes,
            clamp,
            fft,
        })
    }

    pub fn lattice(&self) -> LatticeSpec {
        self.lattice
    }

    pub fn band(&self) -> HeightBand {
        self.band
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn clamp_report(&self) -> ClampReport {
        self.clamp
    }

    /// Two independent realizations from a single transform.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let mut buf: Vec<Complex<f64>> = self
            .amplitudes
            .iter()
            .map(|&a| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(a * re, a * im)
            })
            .collect();
        self.fft.process(&mut buf);
        buf.into_iter().map(|z| (z.re, z.im)).unzip()
    }

    pub fn sample_values<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sample_pair(rng).0
    }

    pub fn sample_field<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldSample {
        FieldSample {
            values: self.sample_values(rng),
            lattice: self.lattice,
            band: self.band,
        }
    }
}

impl FieldSource for SpectralSampler {
    fn lattice(&self) -> LatticeSpec {
        self.lattice
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sample_values(rng)
    }
}

/// Independent strip samplers for a scale decomposition.
///
/// Cutpoints `t_1 < ... < t_K = 1` give the bands `[eps^t_1, ∞)`,
/// `[eps^t_2, eps^t_1)`, ..., `[eps, eps^t_{K-1})`. The sitewise sum of the
/// strip samples has the law of the full field, and partial sums over the
/// first `k` strips realize `X_x(t_k)`.
#[derive(Debug, Clone)]
pub struct ScaleSampler {
    cutpoints: Vec<f64>,
    strips: Vec<SpectralSampler>,
}

impl ScaleSampler {
    pub fn new(lattice: LatticeSpec, cutpoints: &[f64]) -> Result<Self> {
        if cutpoints.is_empty() {
            return Err(Error::InvalidCutpoints("no cutpoints".into()));
        }
        if cutpoints.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
            return Err(Error::InvalidCutpoints("cutpoints must lie in (0, 1]".into()));
        }
        if cutpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidCutpoints("cutpoints must be strictly increasing".into()));
        }
        if *cutpoints.last().unwrap() != 1.0 {
            return Err(Error::InvalidCutpoints("last cutpoint must be 1".into()));
        }
        let mut strips = Vec::with_capacity(cutpoints.len());
        let mut upper = f64::INFINITY;
        for &t in cutpoints {
            let lo = if t == 1.0 { lattice.eps() } else { lattice.height(t) };
            let band = HeightBand::new(lo, upper)?;
            strips.push(SpectralSampler::new(lattice, band)?);
            upper = lo;
        }
        Ok(Self {
            cutpoints: cutpoints.to_vec(),
            strips,
        })
    }

    pub fn cutpoints(&self) -> &[f64] {
        &self.cutpoints
    }

    pub fn strips(&self) -> &[SpectralSampler] {
        &self.strips
    }

    /// One independent sample per strip, top strip first.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<FieldSample> {
        self.strips.iter().map(|s| s.sample_field(rng)).collect()
    }
}

/// Independent strip samples for the given cutpoints; see [`ScaleSampler`].
pub fn sample_field_scales<R: Rng + ?Sized>(
    lattice: LatticeSpec,
    cutpoints: &[f64],
    rng: &mut R,
) -> Result<Vec<FieldSample>> {
    Ok(ScaleSampler::new(lattice, cutpoints)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_derive;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eigenvalues_n4() {
        let s = SpectralSampler::full(LatticeSpec::unit(4).unwrap()).unwrap();
        let ln2 = 2f64.ln();
        let expected = [1.0 + 3.0 * ln2, 1.0 + ln2, 1.0 - ln2, 1.0 + ln2];
        for (e, x) in s.eigenvalues().iter().zip(expected) {
            assert_abs_diff_eq!(*e, x, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(expected[0], 3.079442, epsilon = 1e-6);
        assert_abs_diff_eq!(expected[2], 0.306853, epsilon = 1e-6);
        assert_eq!(s.clamp_report().count, 0);
    }

    #[test]
    fn eigenvalues_symmetric_and_nonnegative() {
        for n in [4usize, 6, 7, 64, 100, 4096] {
            let s = SpectralSampler::full(LatticeSpec::unit(n).unwrap()).unwrap();
            let ev = s.eigenvalues();
            for k in 0..n {
                assert_eq!(ev[k], ev[(n - k) % n]);
                assert!(ev[k] >= 0.0);
            }
        }
    }

    #[test]
    fn empty_band_samples_zero() {
        let l = LatticeSpec::unit(16).unwrap();
        let s = SpectralSampler::new(l, HeightBand::new(0.2, 0.2).unwrap()).unwrap();
        assert!(s.eigenvalues().iter().all(|&e| e == 0.0));
        let mut rng = seed_derive(1, 0);
        assert!(s.sample_values(&mut rng).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn indefinite_row_is_rejected() {
        let l = LatticeSpec::unit(4).unwrap();
        let band = HeightBand::full(&l);
        let err = SpectralSampler::from_row(l, band, &[1.0, 2.0, 0.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::NotPositiveSemidefinite { .. }));
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = SpectralSampler::full(LatticeSpec::unit(64).unwrap()).unwrap();
        let a = s.sample_values(&mut seed_derive(5, 2));
        let b = s.sample_values(&mut seed_derive(5, 2));
        assert_eq!(a, b);
    }

    #[test]
    fn cutpoint_validation() {
        let l = LatticeSpec::unit(64).unwrap();
        assert!(ScaleSampler::new(l, &[]).is_err());
        assert!(ScaleSampler::new(l, &[0.5, 0.4, 1.0]).is_err());
        assert!(ScaleSampler::new(l, &[0.5, 0.5, 1.0]).is_err());
        assert!(ScaleSampler::new(l, &[0.5, 0.9]).is_err());
        assert!(ScaleSampler::new(l, &[0.0, 1.0]).is_err());
        let s = ScaleSampler::new(l, &[0.3, 0.6, 1.0]).unwrap();
        assert_eq!(s.strips().len(), 3);
        assert!(s.strips()[0].band().hi().is_infinite());
        assert_eq!(s.strips()[2].band().lo(), l.eps());
    }

    #[test]
    fn strip_variances_add_up() {
        let l = LatticeSpec::unit(256).unwrap();
        let s = ScaleSampler::new(l, &[0.5, 1.0]).unwrap();
        let total: f64 = s
            .strips()
            .iter()
            .map(|st| crate::field::kernel::strip_covariance(0.0, &st.band(), 1.0))
            .sum();
        assert_abs_diff_eq!(total, l.log_n() + 1.0 - 2f64.ln(), epsilon = 1e-12);
    }
}
