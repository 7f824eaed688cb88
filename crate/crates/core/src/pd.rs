//! Poisson–Dirichlet mass partitions and their moments.
//!
//! A partition is the normalized, decreasing sequence of atoms
//! `Γ_i^{-1/alpha}`, `Γ_i` the arrival times of a unit Poisson process. Only
//! the first `k` atoms are materialized; the rest enter through an analytic
//! tail mass, so the power sum `p_1` is always 1 while `p_r`, `r >= 2`,
//! ignore the tail.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::gibbs::OverlapMatrix;
use crate::stats::{par_tasks, Estimate, KahanSum};

/// Target bound on the omitted second moment.
pub const TAIL_TOLERANCE: f64 = 1e-6;
pub const MIN_ATOMS: usize = 1000;
pub const MAX_ATOMS: usize = 1_000_000;
/// Largest `s` for which [`pd_functional`] sums exactly.
pub const EXACT_MAX_REPLICAS: usize = 3;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "Poisson-Dirichlet alpha = {alpha} outside (0, 1)"
        )))
    }
}

/// Expected unnormalized mass beyond the first `k` atoms.
pub fn tail_mass_estimate(alpha: f64, k: usize) -> f64 {
    let a = 1.0 / alpha;
    (k as f64).powf(1.0 - a) / (a - 1.0)
}

/// Expected unnormalized `Σ_{i>k} Γ_i^{-2/alpha}`.
pub fn tail_square_estimate(alpha: f64, k: usize) -> f64 {
    let a = 2.0 / alpha;
    (k as f64).powf(1.0 - a) / (a - 1.0)
}

/// Smallest atom count whose omitted second moment is below
/// [`TAIL_TOLERANCE`], clamped to `[MIN_ATOMS, MAX_ATOMS]`.
pub fn atom_budget(alpha: f64) -> usize {
    let a = 2.0 / alpha;
    // k^{1-a} / (a-1) <= tol  <=>  k >= (tol (a-1))^{1/(1-a)}
    let k = (TAIL_TOLERANCE * (a - 1.0)).powf(1.0 / (1.0 - a)).ceil();
    if k.is_finite() {
        (k as usize).clamp(MIN_ATOMS, MAX_ATOMS)
    } else {
        MAX_ATOMS
    }
}

/// Decreasing weights plus the mass left in the unmaterialized tail.
#[derive(Debug, Clone, PartialEq)]
pub struct MassPartition {
    pub weights: Vec<f64>,
    pub tail_mass: f64,
}

impl MassPartition {
    /// `p_r = Σ ξ^r`; `p_1` counts the tail.
    pub fn power_sum(&self, r: u32) -> f64 {
        match r {
            0 => f64::NAN,
            1 => 1.0,
            _ => self
                .weights
                .iter()
                .map(|w| w.powi(r as i32))
                .collect::<KahanSum>()
                .total(),
        }
    }

    /// `[p_0, p_1, …, p_max]` in one pass over the atoms, `p_0` unused.
    pub fn power_sums(&self, max: u32) -> Vec<f64> {
        let mut acc = vec![KahanSum::new(); max as usize + 1];
        for &w in &self.weights {
            let mut pw = w * w;
            for slot in acc.iter_mut().skip(2) {
                slot.add(pw);
                pw *= w;
            }
        }
        let mut out: Vec<f64> = acc.iter().map(|a| a.total()).collect();
        out[0] = f64::NAN;
        if max >= 1 {
            out[1] = 1.0;
        }
        out
    }

    /// Total mass, materialized and tail.
    pub fn total(&self) -> f64 {
        crate::stats::kahan_sum(&self.weights) + self.tail_mass
    }

    /// Index drawn with probability `ξ_i`, or `None` for the tail.
    pub fn sample_index<R: Rng + ?Sized>(&self, cumulative: &[f64], rng: &mut R) -> Option<usize> {
        let u = rng.random::<f64>() * (cumulative.last().copied().unwrap_or(0.0) + self.tail_mass);
        let i = cumulative.partition_point(|&c| c <= u);
        (i < self.weights.len()).then_some(i)
    }

    fn cumulative(&self) -> Vec<f64> {
        let mut acc = KahanSum::new();
        self.weights
            .iter()
            .map(|w| {
                acc.add(*w);
                acc.total()
            })
            .collect()
    }
}

pub fn sample_pd<R: Rng + ?Sized>(alpha: f64, k: usize, rng: &mut R) -> Result<MassPartition> {
    check_alpha(alpha)?;
    if k == 0 {
        return Err(Error::InvalidParameter("atom budget must be at least 1".into()));
    }
    let exponent = -1.0 / alpha;
    let mut arrival = 0.0;
    let atoms: Vec<f64> = (0..k)
        .map(|_| {
            arrival += rng.sample::<f64, _>(Exp1);
            arrival.powf(exponent)
        })
        .collect();
    let tail = tail_mass_estimate(alpha, k);
    let total = crate::stats::kahan_sum(&atoms) + tail;
    Ok(MassPartition {
        weights: atoms.iter().map(|a| a / total).collect(),
        tail_mass: tail / total,
    })
}

/// Exponent vector `(n_1, …, n_m)` of a joint moment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MomentSpec {
    exponents: Vec<u32>,
}

impl MomentSpec {
    pub fn new(exponents: Vec<u32>) -> Result<Self> {
        if exponents.is_empty() || exponents.contains(&0) {
            return Err(Error::InvalidParameter(format!("bad exponent vector {exponents:?}")));
        }
        Ok(Self { exponents })
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn order(&self) -> u32 {
        self.exponents.iter().sum()
    }

    /// Every exponent vector (in order) with `Σ n_j = s`.
    pub fn compositions(s: u32) -> Vec<Self> {
        fn rec(left: u32, prefix: &mut Vec<u32>, out: &mut Vec<MomentSpec>) {
            if left == 0 {
                out.push(MomentSpec {
                    exponents: prefix.clone(),
                });
                return;
            }
            for first in 1..=left {
                prefix.push(first);
                rec(left - first, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        if s > 0 {
            rec(s, &mut Vec::new(), &mut out);
        }
        out
    }

    /// `Π_j p_{n_j}`, the unrestricted multi-index sum for one partition.
    pub fn evaluate(&self, partition: &MassPartition) -> f64 {
        self.evaluate_with(&partition.power_sums(self.exponents.iter().copied().max().unwrap_or(1)))
    }

    /// As [`evaluate`](Self::evaluate), from precomputed `power_sums`.
    pub fn evaluate_with(&self, power_sums: &[f64]) -> f64 {
        self.exponents.iter().map(|&n| power_sums[n as usize]).product()
    }
}

impl std::fmt::Display for MomentSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.exponents.iter().map(|n| n.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Partitions per estimate, and atoms per partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PdBudget {
    pub samples: usize,
    pub atoms: usize,
}

impl PdBudget {
    /// `samples` partitions with the adaptive atom count for `alpha`.
    pub fn adaptive(alpha: f64, samples: usize) -> Self {
        Self {
            samples,
            atoms: atom_budget(alpha),
        }
    }
}

fn sample_many<T: Send>(
    alpha: f64,
    budget: PdBudget,
    seed: u64,
    f: impl Fn(&MassPartition) -> T + Sync,
) -> Result<Vec<T>> {
    check_alpha(alpha)?;
    if budget.samples < 2 || budget.atoms == 0 {
        return Err(Error::InvalidParameter(format!(
            "bad Poisson-Dirichlet budget {budget:?}"
        )));
    }
    Ok(par_tasks(budget.samples, seed, |_, rng| {
        let p = sample_pd(alpha, budget.atoms, rng).expect("alpha checked");
        f(&p)
    }))
}

/// Monte Carlo `S(n_1, …, n_m)`.
pub fn moment_estimate(alpha: f64, spec: &MomentSpec, budget: PdBudget, seed: u64) -> Result<Estimate> {
    let values = sample_many(alpha, budget, seed, |p| spec.evaluate(p))?;
    Ok(Estimate::from_samples(&values))
}

/// [`moment_estimate`] for several exponent vectors on one set of partitions.
pub fn moment_estimates(alpha: f64, specs: &[MomentSpec], budget: PdBudget, seed: u64) -> Result<Vec<Estimate>> {
    let top = specs
        .iter()
        .flat_map(|s| s.exponents.iter().copied())
        .max()
        .unwrap_or(1)
        .max(1);
    let rows = sample_many(alpha, budget, seed, |p| {
        let sums = p.power_sums(top);
        specs.iter().map(|s| s.evaluate_with(&sums)).collect::<Vec<f64>>()
    })?;
    Ok((0..specs.len())
        .map(|k| Estimate::from_samples(&rows.iter().map(|r| r[k]).collect::<Vec<_>>()))
        .collect())
}

/// Moment vectors appearing in the recursion for `spec`, distinguished
/// coordinate first: `(n_1+1, …)`, `(2)`, `spec`, then one merged vector
/// per remaining coordinate.
fn recursion_terms(spec: &MomentSpec) -> Vec<MomentSpec> {
    let n = &spec.exponents;
    let mut raised = n.clone();
    raised[0] += 1;
    let mut terms = vec![
        MomentSpec { exponents: raised },
        MomentSpec { exponents: vec![2] },
        spec.clone(),
    ];
    for l in 1..n.len() {
        let mut merged = vec![n[0] + n[l]];
        merged.extend(
            n.iter()
                .enumerate()
                .filter(|(i, _)| *i != 0 && *i != l)
                .map(|(_, v)| *v),
        );
        terms.push(MomentSpec { exponents: merged });
    }
    terms
}

/// Residual of the moment recursion
/// `S(n_1+1, …) = (S(2)/s) S(n) + ((n_1-1)/s) S(n) + Σ_{l>=2} (n_l/s) S(n_1+n_l, …)`
/// with all moments estimated on the same partitions and the standard
/// error from the delta method.
pub fn recursion_residual(alpha: f64, spec: &MomentSpec, budget: PdBudget, seed: u64) -> Result<Estimate> {
    Ok(recursion_residuals(alpha, std::slice::from_ref(spec), budget, seed)?.remove(0))
}

/// [`recursion_residual`] for several exponent vectors on one set of partitions.
pub fn recursion_residuals(alpha: f64, specs: &[MomentSpec], budget: PdBudget, seed: u64) -> Result<Vec<Estimate>> {
    let terms: Vec<Vec<MomentSpec>> = specs.iter().map(recursion_terms).collect();
    let top = specs.iter().map(|s| s.order() + 1).max().unwrap_or(2).max(2);
    let rows = sample_many(alpha, budget, seed, |p| {
        let sums = p.power_sums(top);
        terms
            .iter()
            .map(|ts| ts.iter().map(|t| t.evaluate_with(&sums)).collect::<Vec<f64>>())
            .collect::<Vec<_>>()
    })?;
    Ok(specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let per_sample: Vec<&[f64]> = rows.iter().map(|r| r[i].as_slice()).collect();
            residual_from_rows(spec, &per_sample)
        })
        .collect())
}

fn residual_from_rows(spec: &MomentSpec, rows: &[&[f64]]) -> Estimate {
    let width = rows[0].len();
    let s = spec.order() as f64;
    let n1 = spec.exponents[0] as f64;
    let means: Vec<f64> = (0..width)
        .map(|k| rows.iter().map(|r| r[k]).collect::<KahanSum>().total() / rows.len() as f64)
        .collect();
    let linear = |r: &[f64]| {
        let merged: f64 = (3..width).map(|k| spec.exponents[k - 2] as f64 / s * r[k]).sum();
        r[0] - (n1 - 1.0) / s * r[2] - merged
    };
    let residual = linear(&means) - means[1] * means[2] / s;
    let influence: Vec<f64> = rows
        .iter()
        .map(|r| linear(r) - (means[2] * r[1] + means[1] * r[2]) / s)
        .collect();
    Estimate {
        mean: residual,
        se: Estimate::from_samples(&influence).se,
        samples: rows.len(),
    }
}

/// All set partitions of `{0, …, n-1}` as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, n: usize, blocks: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..=blocks {
            cur.push(b);
            rec(i + 1, n, blocks.max(b + 1), cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, 0, &mut Vec::with_capacity(n), &mut out);
    out
}

fn block_sizes(labels: &[usize]) -> Vec<u32> {
    let blocks = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0u32; blocks];
    for &l in labels {
        sizes[l] += 1;
    }
    sizes
}

/// Restricted sum over pairwise distinct indices, one per block,
/// `Σ_{k_B distinct} Π_B ξ_{k_B}^{|B|}`, by Möbius inversion over the
/// coarsenings of the block structure.
pub fn restricted_block_sum(sizes: &[u32], partition: &MassPartition) -> f64 {
    let b = sizes.len();
    set_partitions(b)
        .iter()
        .map(|coarse| {
            let groups = coarse.iter().max().map_or(0, |m| m + 1);
            let mut merged = vec![0u32; groups];
            let mut count = vec![0u32; groups];
            for (blk, &g) in coarse.iter().enumerate() {
                merged[g] += sizes[blk];
                count[g] += 1;
            }
            let mobius: f64 = count
                .iter()
                .map(|&c| {
                    let f: f64 = (1..c).map(f64::from).product();
                    if c % 2 == 1 {
                        f
                    } else {
                        -f
                    }
                })
                .product();
            mobius * merged.iter().map(|&r| partition.power_sum(r)).product::<f64>()
        })
        .sum()
}

/// Coincidence matrix `δ_{ll'}` of a labelling.
pub fn coincidence_matrix(labels: &[usize]) -> OverlapMatrix {
    let s = labels.len();
    let upper: Vec<f64> = (0..s)
        .flat_map(|i| (i + 1..s).map(move |j| (i, j)))
        .map(|(i, j)| if labels[i] == labels[j] { 1.0 } else { 0.0 })
        .collect();
    OverlapMatrix::from_upper(s, &upper)
}

/// `Σ_{k_1..k_s} ξ_{k_1}⋯ξ_{k_s} F(δ)` for one partition, summed over
/// coincidence patterns.
pub fn exact_inner_sum<F>(s: usize, f: &F, partition: &MassPartition) -> f64
where
    F: Fn(&OverlapMatrix) -> f64 + ?Sized,
{
    set_partitions(s)
        .iter()
        .map(|labels| restricted_block_sum(&block_sizes(labels), partition) * f(&coincidence_matrix(labels)))
        .collect::<KahanSum>()
        .total()
}

/// The same sum estimated from `draws` sampled index tuples. Tail draws are
/// distinct from every other draw.
pub fn sampled_inner_sum<F, R>(s: usize, f: &F, partition: &MassPartition, draws: usize, rng: &mut R) -> f64
where
    F: Fn(&OverlapMatrix) -> f64 + ?Sized,
    R: Rng + ?Sized,
{
    let cumulative = partition.cumulative();
    let dust_base = partition.weights.len();
    let mut acc = KahanSum::new();
    let mut labels = vec![0usize; s];
    for _ in 0..draws {
        for (l, slot) in labels.iter_mut().enumerate() {
            *slot = partition.sample_index(&cumulative, rng).unwrap_or(dust_base + l);
        }
        acc.add(f(&coincidence_matrix(&labels)));
    }
    acc.total() / draws as f64
}

/// `E[Σ ξ_{k_1}⋯ξ_{k_s} F(δ_{k_l k_l'})]`; exact inner sums for
/// `s <= EXACT_MAX_REPLICAS`, otherwise `inner_draws` sampled tuples per
/// partition.
pub fn pd_functional<F>(
    alpha: f64,
    s: usize,
    f: &F,
    budget: PdBudget,
    inner_draws: usize,
    seed: u64,
) -> Result<Estimate>
where
    F: Fn(&OverlapMatrix) -> f64 + Sync + ?Sized,
{
    if s < 1 {
        return Err(Error::InvalidParameter("need s >= 1".into()));
    }
    check_alpha(alpha)?;
    if s <= EXACT_MAX_REPLICAS {
        let values = sample_many(alpha, budget, seed, |p| exact_inner_sum(s, f, p))?;
        return Ok(Estimate::from_samples(&values));
    }
    if inner_draws == 0 {
        return Err(Error::InvalidParameter("need inner_draws >= 1 for s > 3".into()));
    }
    let values = par_tasks(budget.samples, seed, |_, rng| {
        let p = sample_pd(alpha, budget.atoms, rng).expect("alpha checked");
        sampled_inner_sum(s, f, &p, inner_draws, rng)
    });
    Ok(Estimate::from_samples(&values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn rng() -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(17)
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(sample_pd(0.0, 10, &mut rng()).is_err());
        assert!(sample_pd(1.0, 10, &mut rng()).is_err());
        assert!(sample_pd(0.5, 0, &mut rng()).is_err());
    }

    #[test]
    fn partition_sorted_and_normalized() {
        let p = sample_pd(0.5, 2000, &mut rng()).unwrap();
        assert!(p.weights.windows(2).all(|w| w[0] >= w[1]));
        assert!(p.weights.iter().all(|&w| w > 0.0));
        assert!((p.total() - 1.0).abs() < 1e-12);
        assert_eq!(p.power_sum(1), 1.0);
    }

    #[test]
    fn budget_meets_tolerance() {
        for alpha in [0.3, 0.5, 0.8, 0.9] {
            let k = atom_budget(alpha);
            assert!(k >= MIN_ATOMS);
            assert!(k == MAX_ATOMS || tail_square_estimate(alpha, k) <= TAIL_TOLERANCE * 1.0001);
        }
        assert_eq!(atom_budget(0.5), MIN_ATOMS);
    }

    #[test]
    fn bell_numbers() {
        let counts: Vec<usize> = (1..=5).map(|n| set_partitions(n).len()).collect();
        assert_eq!(counts, vec![1, 2, 5, 15, 52]);
    }

    #[test]
    fn restricted_sums_by_brute_force() {
        let p = MassPartition {
            weights: vec![0.4, 0.3, 0.2],
            tail_mass: 0.1,
        };
        // two distinct materialized indices, plus tail contributions to p_1
        let w = &p.weights;
        let mut direct = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    direct += w[i] * w[i] * w[j];
                }
            }
        }
        // the tail contributes to the second index's first power only
        let tail_part: f64 = w.iter().map(|x| x * x).sum::<f64>() * p.tail_mass;
        assert_abs_diff_eq!(restricted_block_sum(&[2, 1], &p), direct + tail_part, epsilon = 1e-15);
    }

    #[test]
    fn inner_sum_of_one_is_one() {
        let p = sample_pd(0.4, 1000, &mut rng()).unwrap();
        for s in 1..=4 {
            assert_abs_diff_eq!(exact_inner_sum(s, &|_: &OverlapMatrix| 1.0, &p), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn compositions_count() {
        assert_eq!(MomentSpec::compositions(4).len(), 8);
        assert!(MomentSpec::new(vec![]).is_err());
        assert!(MomentSpec::new(vec![1, 0]).is_err());
        assert_eq!(MomentSpec::new(vec![2, 1]).unwrap().to_string(), "(2,1)");
    }

    #[test]
    fn recursion_for_single_one_is_exact() {
        let spec = MomentSpec::new(vec![1]).unwrap();
        let r = recursion_residual(
            0.5,
            &spec,
            PdBudget {
                samples: 50,
                atoms: 500,
            },
            1,
        )
        .unwrap();
        assert!(r.mean.abs() < 1e-15);
    }

    #[test]
    fn recursion_terms_layout() {
        let t = recursion_terms(&MomentSpec::new(vec![1, 2, 1]).unwrap());
        let v: Vec<Vec<u32>> = t.iter().map(|m| m.exponents().to_vec()).collect();
        assert_eq!(v, vec![vec![2, 2, 1], vec![2], vec![1, 2, 1], vec![3, 1], vec![2, 2]]);
    }
}
