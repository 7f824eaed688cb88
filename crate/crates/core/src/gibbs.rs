//! Partition functions, Gibbs weights, replica overlaps and high points.

use std::sync::Arc;

use rand::Rng;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::lattice::{overlap, overlap_from_gap};
use crate::field::spectral::FieldSource;
use crate::stats::{par_tasks, Estimate, KahanSum};

/// `log Σ_x exp(beta X_x)`, shifted by the maximum.
pub fn log_partition(values: &[f64], beta: f64) -> f64 {
    let top = values.iter().map(|v| beta * v).fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return top;
    }
    let sum: KahanSum = values.iter().map(|v| (beta * v - top).exp()).collect();
    top + sum.total().ln()
}

/// `f_N(beta) = log Z / log N`.
pub fn free_energy(values: &[f64], beta: f64) -> f64 {
    log_partition(values, beta) / (values.len() as f64).ln()
}

/// Normalized Gibbs weights of one field realization.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsEnsemble {
    beta: f64,
    log_z: f64,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl GibbsEnsemble {
    pub fn new(values: &[f64], beta: f64) -> Self {
        let log_z = log_partition(values, beta);
        let weights: Vec<f64> = values.iter().map(|v| (beta * v - log_z).exp()).collect();
        // renormalize so the cumulative ends at 1 up to the last rounding
        let total = crate::stats::kahan_sum(&weights);
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = KahanSum::new();
        let cumulative = weights
            .iter()
            .map(|w| {
                acc.add(*w);
                acc.total()
            })
            .collect();
        Self {
            beta,
            log_z,
            weights,
            cumulative,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn free_energy(&self) -> f64 {
        self.log_z / (self.n() as f64).ln()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ_x G(x) h_x`.
    pub fn expect(&self, h: &[f64]) -> f64 {
        assert_eq!(h.len(), self.weights.len());
        self.weights
            .iter()
            .zip(h)
            .map(|(w, v)| w * v)
            .collect::<KahanSum>()
            .total()
    }

    /// One site drawn from the weights by inverse CDF.
    pub fn sample_site<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("lattice is nonempty");
        let u = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        // skip zero-weight sites that share the cumulative value
        i.min(self.weights.len() - 1)
    }

    pub fn sample_replicas<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> OverlapDraw {
        sample_replicas(self, s, rng)
    }
}

/// Symmetric `s × s` overlap matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix {
    size: usize,
    entries: Vec<f64>,
}

impl OverlapMatrix {
    pub fn from_sites(sites: &[usize], n: usize) -> Self {
        let size = sites.len();
        let mut entries = vec![1.0; size * size];
        for i in 0..size {
            for j in i + 1..size {
                let q = overlap(sites[i], sites[j], n);
                entries[i * size + j] = q;
                entries[j * size + i] = q;
            }
        }
        Self { size, entries }
    }

    /// Builds a matrix from its strict upper triangle, row by row.
    pub fn from_upper(size: usize, upper: &[f64]) -> Self {
        assert_eq!(upper.len(), size * size.saturating_sub(1) / 2);
        let mut entries = vec![1.0; size * size];
        let mut k = 0;
        for i in 0..size {
            for j in i + 1..size {
                entries[i * size + j] = upper[k];
                entries[j * size + i] = upper[k];
                k += 1;
            }
        }
        Self { size, entries }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    /// Upper-left `k × k` block.
    pub fn leading(&self, k: usize) -> Self {
        assert!(k <= self.size);
        let entries = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        Self { size: k, entries }
    }

    /// Relabels replicas: entry `(i, j)` becomes `(perm[i], perm[j])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.size);
        let k = self.size;
        let entries = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .map(|(i, j)| self.get(perm[i], perm[j]))
            .collect();
        Self { size: k, entries }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.size).all(|i| (0..self.size).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// Replica sites and their overlaps.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapDraw {
    pub sites: Vec<usize>,
    pub matrix: OverlapMatrix,
}

/// `s` independent draws from the Gibbs weights.
pub fn sample_replicas<R: Rng + ?Sized>(ensemble: &GibbsEnsemble, s: usize, rng: &mut R) -> OverlapDraw {
    let sites: Vec<usize> = (0..s).map(|_| ensemble.sample_site(rng)).collect();
    let matrix = OverlapMatrix::from_sites(&sites, ensemble.n());
    OverlapDraw { sites, matrix }
}

/// `1{q12 >= min(q13, q23)}` on the leading three replicas.
pub fn ultrametric_indicator(m: &OverlapMatrix) -> f64 {
    if m.get(0, 1) >= m.get(0, 2).min(m.get(1, 2)) {
        1.0
    } else {
        0.0
    }
}

/// Fields outer, replicas inner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicaBudget {
    pub fields: usize,
    pub replicas: usize,
}

impl ReplicaBudget {
    pub fn new(fields: usize, replicas: usize) -> Result<Self> {
        let b = Self { fields, replicas };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fields < 2 || self.replicas < 1 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 fields and 1 replica draw, got {} and {}",
                self.fields, self.replicas
            )));
        }
        Ok(())
    }
}

/// Exact law of the overlap of two independent Gibbs replicas.
///
/// The pair measure `Σ_{x,y} G(x) G(y) 1{gap(x,y) = d}` is the circular
/// autocorrelation of the weights, computed by FFT in `O(N log N)`.
#[derive(Clone)]
pub struct PairOverlapLaw {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PairOverlapLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PairOverlapLaw").field("n", &self.n).finish()
    }
}

impl PairOverlapLaw {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Mass at each circle gap `0..=n/2`.
    pub fn gap_masses(&self, ensemble: &GibbsEnsemble) -> Vec<f64> {
        let n = self.n;
        assert_eq!(ensemble.n(), n);
        let mut buf: Vec<Complex64> = ensemble.weights().iter().map(|&w| Complex64::new(w, 0.0)).collect();
        self.forward.process(&mut buf);
        for z in buf.iter_mut() {
            *z = Complex64::new(z.norm_sqr(), 0.0);
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        let auto: Vec<f64> = buf.iter().map(|z| (z.re * scale).max(0.0)).collect();
        let half = n / 2;
        (0..=half)
            .map(|d| {
                if d == 0 || 2 * d == n {
                    auto[d]
                } else {
                    auto[d] + auto[n - d]
                }
            })
            .collect()
    }

    /// `E G^{×2}[h(q12)]` for one field, summed exactly.
    pub fn expect(&self, ensemble: &GibbsEnsemble, h: impl Fn(f64) -> f64) -> f64 {
        self.gap_masses(ensemble)
            .iter()
            .enumerate()
            .map(|(d, m)| m * h(overlap_from_gap(d, self.n)))
            .collect::<KahanSum>()
            .total()
    }
}

/// Mean and SE of `f_N(beta)` over independent fields.
pub fn free_energy_estimate<S: FieldSource>(source: &S, beta: f64, fields: usize, seed: u64) -> Estimate {
    free_energy_curve(source, &[beta], fields, seed).remove(0)
}

/// `f_N` on a grid of temperatures, using the same fields at every `beta`.
pub fn free_energy_curve<S: FieldSource>(source: &S, betas: &[f64], fields: usize, seed: u64) -> Vec<Estimate> {
    let per_field = par_tasks(fields, seed, |_, rng| {
        let x = source.draw(rng);
        betas.iter().map(|&b| free_energy(&x, b)).collect::<Vec<f64>>()
    });
    (0..betas.len())
        .map(|k| Estimate::from_samples(&per_field.iter().map(|row| row[k]).collect::<Vec<_>>()))
        .collect()
}

/// `x_beta^(N)(q) = E G^{×2}{q12 <= q}` on a grid.
///
/// The inner replica average is done exactly with [`PairOverlapLaw`]; only
/// the field average is random.
pub fn overlap_cdf_estimate<S: FieldSource>(
    source: &S,
    beta: f64,
    q_grid: &[f64],
    fields: usize,
    seed: u64,
) -> Result<Vec<Estimate>> {
    if let Some(q) = q_grid.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(Error::InvalidParameter(format!("q = {q} outside [0, 1]")));
    }
    let law = PairOverlapLaw::new(source.n());
    let n = source.n();
    let per_field = par_tasks(fields, seed, |_, rng| {
        let g = GibbsEnsemble::new(&source.draw(rng), beta);
        let masses = law.gap_masses(&g);
        q_grid
            .iter()
            .map(|&q| {
                masses
                    .iter()
                    .enumerate()
                    .filter(|(d, _)| overlap_from_gap(*d, n) <= q)
                    .map(|(_, m)| *m)
                    .collect::<KahanSum>()
                    .total()
            })
            .collect::<Vec<f64>>()
    });
    Ok((0..q_grid.len())
        .map(|k| Estimate::from_samples(&per_field.iter().map(|row| row[k]).collect::<Vec<_>>()))
        .collect())
}

/// `E G^{×2}[h(q12)]` with the inner sum exact.
pub fn pair_functional_estimate<S, H>(source: &S, beta: f64, h: H, fields: usize, seed: u64) -> Estimate
where
    S: FieldSource,
    H: Fn(f64) -> f64 + Sync,
{
    let law = PairOverlapLaw::new(source.n());
    let values = par_tasks(fields, seed, |_, rng| {
        let g = GibbsEnsemble::new(&source.draw(rng), beta);
        law.expect(&g, &h)
    });
    Estimate::from_samples(&values)
}

/// `E G^{×s}[F(q_{ll'})]` by sampling `budget.replicas` replica tuples per field.
pub fn overlap_functional_estimate<S, F>(
    source: &S,
    beta: f64,
    s: usize,
    f: &F,
    budget: ReplicaBudget,
    seed: u64,
) -> Result<Estimate>
where
    S: FieldSource,
    F: Fn(&OverlapMatrix) -> f64 + Sync + ?Sized,
{
    budget.validate()?;
    if s < 2 {
        return Err(Error::InvalidParameter(format!("need s >= 2 replicas, got {s}")));
    }
    let values = par_tasks(budget.fields, seed, |_, rng| {
        let g = GibbsEnsemble::new(&source.draw(rng), beta);
        let acc: KahanSum = (0..budget.replicas)
            .map(|_| f(&sample_replicas(&g, s, rng).matrix))
            .collect();
        acc.total() / budget.replicas as f64
    });
    Ok(Estimate::from_samples(&values))
}

/// Sites with `X_x >= sqrt(2) gamma log N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighPoints {
    pub count: usize,
    /// `log |H| / log N`, absent when no site qualifies.
    pub exponent: Option<f64>,
}

pub fn high_points(values: &[f64], gamma: f64) -> HighPoints {
    let log_n = (values.len() as f64).ln();
    let threshold = std::f64::consts::SQRT_2 * gamma * log_n;
    let count = values.iter().filter(|&&v| v >= threshold).count();
    HighPoints {
        count,
        exponent: (count > 0).then(|| (count as f64).ln() / log_n),
    }
}

/// Field-averaged high-point exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighPointSummary {
    /// Mean of `log|H|/log N` over fields with at least one high point.
    pub exponent: Estimate,
    /// Fields with no high point.
    pub empty_fields: usize,
    pub mean_count: f64,
}

pub fn high_point_estimate<S: FieldSource>(source: &S, gamma: f64, fields: usize, seed: u64) -> HighPointSummary {
    let per_field = par_tasks(fields, seed, |_, rng| high_points(&source.draw(rng), gamma));
    let exps: Vec<f64> = per_field.iter().filter_map(|h| h.exponent).collect();
    let counts: KahanSum = per_field.iter().map(|h| h.count as f64).collect();
    HighPointSummary {
        exponent: Estimate::from_samples(&exps),
        empty_fields: per_field.len() - exps.len(),
        mean_count: counts.total() / fields.max(1) as f64,
    }
}

/// Empirical Ghirlanda–Guerra residual for one functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgResidual {
    pub residual: Estimate,
    /// `E G^{×(s+1)}[q_{1,s+1} F]`.
    pub lhs: f64,
    /// `(1/s) E[q12] E[F] + (1/s) Σ_k E[q_{1k} F]`.
    pub rhs: f64,
    /// `1 / log N`, the natural size of finite-volume corrections.
    pub scale: f64,
}

/// Residual of the Ghirlanda–Guerra identity with `F` a function of the
/// overlaps among the first `s` replicas.
///
/// Each field contributes the inner averages `A = q_{1,s+1} F`, `B = q12`,
/// `C = F` and `D = Σ_{k=2}^s q_{1k} F`. The residual
/// `Ā - B̄ C̄ / s - D̄ / s` is a smooth function of field means, so its
/// standard error follows from the delta method.
pub fn gg_residual<S, F>(source: &S, beta: f64, s: usize, f: &F, budget: ReplicaBudget, seed: u64) -> Result<GgResidual>
where
    S: FieldSource,
    F: Fn(&OverlapMatrix) -> f64 + Sync + ?Sized,
{
    budget.validate()?;
    if s < 2 {
        return Err(Error::InvalidParameter(format!("need s >= 2 replicas, got {s}")));
    }
    let per_field: Vec<[f64; 4]> = par_tasks(budget.fields, seed, |_, rng| {
        let g = GibbsEnsemble::new(&source.draw(rng), beta);
        let mut acc = [KahanSum::new(), KahanSum::new(), KahanSum::new(), KahanSum::new()];
        for _ in 0..budget.replicas {
            let m = sample_replicas(&g, s + 1, rng).matrix;
            let fv = f(&m.leading(s));
            acc[0].add(m.get(0, s) * fv);
            acc[1].add(m.get(0, 1));
            acc[2].add(fv);
            acc[3].add((1..s).map(|k| m.get(0, k)).sum::<f64>() * fv);
        }
        let r = budget.replicas as f64;
        [
            acc[0].total() / r,
            acc[1].total() / r,
            acc[2].total() / r,
            acc[3].total() / r,
        ]
    });
    let col = |k: usize| per_field.iter().map(|row| row[k]).collect::<Vec<f64>>();
    let (a, b, c, d) = (col(0), col(1), col(2), col(3));
    let mean = |v: &[f64]| crate::stats::kahan_sum(v) / v.len() as f64;
    let (ma, mb, mc, md) = (mean(&a), mean(&b), mean(&c), mean(&d));
    let sf = s as f64;
    let rhs = mb * mc / sf + md / sf;
    let influence: Vec<f64> = (0..a.len())
        .map(|i| a[i] - (mc * b[i] + mb * c[i]) / sf - d[i] / sf)
        .collect();
    let spread = Estimate::from_samples(&influence);
    Ok(GgResidual {
        residual: Estimate {
            mean: ma - rhs,
            se: spread.se,
            samples: a.len(),
        },
        lhs: ma,
        rhs,
        scale: 1.0 / source.log_n(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    #[test]
    fn log_partition_examples() {
        assert_abs_diff_eq!(log_partition(&[0.0; 16], 3.0), 16f64.ln(), epsilon = 1e-15);
        let direct = (1f64.exp() + 0.5f64.exp() + 1.0 + (-1f64).exp()).ln();
        assert_abs_diff_eq!(log_partition(&[1.0, 0.5, 0.0, -1.0], 1.0), direct, epsilon = 1e-14);
        let lz = log_partition(&[500.0, -1e6, -1e6, -1e6], 2.0);
        assert_abs_diff_eq!(lz, 1000.0, epsilon = 1e-12);
        assert_abs_diff_eq!(free_energy(&[0.0; 64], 1.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn weights_normalized() {
        let g = GibbsEnsemble::new(&[3.0, -2.0, 0.1, 7.5, 7.5], 4.0);
        let total: f64 = g.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(g.weights().iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn degenerate_weights_give_unit_overlaps() {
        let mut v = vec![-1e4; 32];
        v[7] = 0.0;
        let g = GibbsEnsemble::new(&v, 1.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let d = g.sample_replicas(4, &mut rng);
        assert!(d.sites.iter().all(|&s| s == 7));
        assert!((0..4).all(|i| (0..4).all(|j| d.matrix.get(i, j) == 1.0)));
    }

    #[test]
    fn overlap_matrix_shape() {
        let m = OverlapMatrix::from_sites(&[0, 1, 8], 16);
        assert!(m.is_symmetric());
        assert_eq!(m.get(2, 2), 1.0);
        assert_eq!(m.get(0, 1), 1.0);
        assert_abs_diff_eq!(m.get(0, 2), 1.0 - 8f64.ln() / 16f64.ln(), epsilon = 1e-15);
        let p = m.permuted(&[2, 0, 1]);
        assert_eq!(p.get(0, 1), m.get(2, 0));
        assert_eq!(m.leading(2).size(), 2);
        let u = OverlapMatrix::from_upper(3, &[0.1, 0.2, 0.3]);
        assert_eq!(u.get(2, 1), 0.3);
    }

    #[test]
    fn ultrametric_examples() {
        assert_eq!(
            ultrametric_indicator(&OverlapMatrix::from_upper(3, &[0.5, 0.2, 0.2])),
            1.0
        );
        assert_eq!(
            ultrametric_indicator(&OverlapMatrix::from_upper(3, &[0.1, 0.2, 0.3])),
            0.0
        );
    }

    #[test]
    fn pair_law_matches_direct_sum() {
        let vals: Vec<f64> = (0..24).map(|i| ((i * 7 % 11) as f64).sin() * 2.0).collect();
        let g = GibbsEnsemble::new(&vals, 1.7);
        let law = PairOverlapLaw::new(24);
        let masses = law.gap_masses(&g);
        let mut direct = vec![0.0; 13];
        for x in 0..24 {
            for y in 0..24 {
                direct[crate::field::circle_gap(x, y, 24)] += g.weights()[x] * g.weights()[y];
            }
        }
        for (a, b) in masses.iter().zip(&direct) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn high_point_threshold_inclusive() {
        let n = 16usize;
        let t = std::f64::consts::SQRT_2 * 0.5 * (n as f64).ln();
        let mut v = vec![0.0; n];
        v[0] = t;
        v[1] = t + 1.0;
        let h = high_points(&v, 0.5);
        assert_eq!(h.count, 2);
        assert_abs_diff_eq!(h.exponent.unwrap(), 2f64.ln() / 16f64.ln(), epsilon = 1e-15);
        assert_eq!(high_points(&v, 5.0).exponent, None);
    }

    #[test]
    fn budget_validation() {
        assert!(ReplicaBudget::new(1, 10).is_err());
        assert!(ReplicaBudget::new(2, 0).is_err());
        assert!(ReplicaBudget::new(2, 1).is_ok());
    }
}
