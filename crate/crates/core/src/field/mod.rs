//! The discrete circle, cone covariances and exact field samplers.

pub mod dense;
pub mod kernel;
pub mod lattice;
pub mod spectral;

pub use dense::{dense_covariance, dense_eigenvalues, DenseSampler};
pub use kernel::{build_covariance_matrix, strip_covariance, CovarianceKernel, HeightBand};
pub use lattice::{circle_distance, circle_gap, overlap, overlap_from_gap, LatticeSpec};
pub use spectral::{
    circulant_eigenvalues, sample_field_scales, ClampReport, FieldSample, FieldSource, ScaleSampler, SpectralSampler,
};
