//! Dense reference sampler: Cholesky factor of the full covariance matrix.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::field::kernel::{build_covariance_matrix, HeightBand};
use crate::field::lattice::LatticeSpec;
use crate::field::spectral::{FieldSample, FieldSource};

/// Largest lattice the dense oracle accepts.
pub const DENSE_MAX_SITES: usize = 1024;

/// The full `N x N` covariance matrix built from the circulant row.
pub fn dense_covariance(lattice: &LatticeSpec, band: &HeightBand) -> DMatrix<f64> {
    let n = lattice.n();
    let row = build_covariance_matrix(lattice, band);
    DMatrix::from_fn(n, n, |i, j| row[(j + n - i) % n])
}

/// Eigenvalues of the dense covariance matrix, ascending.
pub fn dense_eigenvalues(lattice: &LatticeSpec, band: &HeightBand) -> Vec<f64> {
    let mut ev: Vec<f64> = dense_covariance(lattice, band)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

#[derive(Debug, Clone)]
pub struct DenseSampler {
    lattice: LatticeSpec,
    band: HeightBand,
    factor: DMatrix<f64>,
}

impl DenseSampler {
    pub fn new(lattice: LatticeSpec, band: HeightBand) -> Result<Self> {
        if lattice.n() > DENSE_MAX_SITES {
            return Err(Error::InvalidParameter(format!(
                "dense sampler limited to {DENSE_MAX_SITES} sites, got {}",
                lattice.n()
            )));
        }
        let factor = dense_covariance(&lattice, &band)
            .cholesky()
            .ok_or(Error::CholeskyFailed)?
            .l();
        Ok(Self { lattice, band, factor })
    }

    pub fn sample_field<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldSample {
        FieldSample {
            values: self.draw(rng),
            lattice: self.lattice,
            band: self.band,
        }
    }
}

impl FieldSource for DenseSampler {
    fn lattice(&self) -> LatticeSpec {
        self.lattice
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.lattice.n();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.factor * z).iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_large_lattices() {
        let l = LatticeSpec::unit(2048).unwrap();
        assert!(DenseSampler::new(l, HeightBand::full(&l)).is_err());
    }

    #[test]
    fn factor_reproduces_matrix() {
        let l = LatticeSpec::unit(16).unwrap();
        let band = HeightBand::full(&l);
        let s = DenseSampler::new(l, band).unwrap();
        let c = dense_covariance(&l, &band);
        let diff = (&s.factor * s.factor.transpose() - c).abs().max();
        assert!(diff < 1e-12);
    }
}
