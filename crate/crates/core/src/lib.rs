//! Log-correlated Gaussian fields on the discrete circle, their two-scale
//! perturbations, Gibbs measures and overlaps, and Poisson–Dirichlet
//! statistics, with closed-form limits to compare against.

pub mod error;
pub mod field;
pub mod gibbs;
pub mod pd;
pub mod perturbed;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
pub use field::{FieldSample, FieldSource, HeightBand, LatticeSpec, SpectralSampler};
pub use gibbs::{GibbsEnsemble, OverlapMatrix, ReplicaBudget};
pub use pd::{MassPartition, MomentSpec, PdBudget};
pub use perturbed::{PerturbationSpec, TwoScaleSampler};
pub use rng::{child_seed, seed_derive, McRng};
pub use stats::Estimate;
