use logrem_core::gibbs::{ultrametric_indicator, OverlapMatrix};
use logrem_core::pd::{
    atom_budget, exact_inner_sum, moment_estimate, pd_functional, recursion_residual, recursion_residuals, sample_pd,
    sampled_inner_sum, set_partitions, MomentSpec, PdBudget,
};
use logrem_core::seed_derive;
use logrem_core::stats::par_tasks;
use logrem_core::theory::pd_moment;
use logrem_core::Estimate;

fn rising(x: f64, k: u32) -> f64 {
    (0..k).map(|i| x + i as f64).product()
}

/// Expected sum over pairwise distinct indices,
/// `α^{m-1} (m-1)! / (s-1)! Π (1-α)_{n_j - 1}`.
fn distinct_moment(alpha: f64, exps: &[u32]) -> f64 {
    let m = exps.len() as u32;
    let s: u32 = exps.iter().sum();
    let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
    alpha.powi(m as i32 - 1) * fact(m - 1) / fact(s - 1)
        * exps.iter().map(|&n| rising(1.0 - alpha, n - 1)).product::<f64>()
}

/// Unrestricted moment: sum of distinct-index moments over index coincidences.
fn unrestricted_moment(alpha: f64, exps: &[u32]) -> f64 {
    set_partitions(exps.len())
        .iter()
        .map(|labels| {
            let blocks = labels.iter().max().unwrap() + 1;
            let mut merged = vec![0u32; blocks];
            for (j, &b) in labels.iter().enumerate() {
                merged[b] += exps[j];
            }
            distinct_moment(alpha, &merged)
        })
        .sum()
}

#[test]
fn recursion_solution_matches_closed_form() {
    for alpha in [0.1, 0.3, 0.5, 0.8, 0.95] {
        for s in 1..=7 {
            for spec in MomentSpec::compositions(s) {
                let a = pd_moment(alpha, spec.exponents());
                let b = unrestricted_moment(alpha, spec.exponents());
                assert!((a - b).abs() < 1e-12, "alpha={alpha} {spec}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn known_moment_values() {
    assert!((pd_moment(0.5, &[2]) - 0.5).abs() < 1e-15);
    assert!((pd_moment(0.5, &[3]) - 0.375).abs() < 1e-15);
    assert!((pd_moment(0.5, &[2, 1]) - 0.5).abs() < 1e-15);
    assert_eq!(pd_moment(0.37, &[1, 1, 1, 1]), 1.0);
}

#[test]
fn sampled_moments_match_closed_form() {
    let alpha = 0.5;
    let budget = PdBudget::adaptive(alpha, 20_000);
    for exps in [vec![2], vec![3], vec![2, 1], vec![2, 2], vec![4], vec![1, 1]] {
        let spec = MomentSpec::new(exps).unwrap();
        let e = moment_estimate(alpha, &spec, budget, 5).unwrap();
        let target = pd_moment(alpha, spec.exponents());
        if e.se == 0.0 {
            assert!((e.mean - target).abs() < 1e-12);
        } else {
            assert!(e.z_score(target) < 4.0, "{spec}: {e:?} vs {target}");
        }
    }
}

#[test]
fn recursion_residuals_small_for_low_orders() {
    for alpha in [0.3, 0.5, 0.8] {
        let budget = PdBudget::adaptive(alpha, 20_000);
        let specs: Vec<MomentSpec> = (1..=4).flat_map(MomentSpec::compositions).collect();
        let residuals = recursion_residuals(alpha, &specs, budget, 19).unwrap();
        for (spec, r) in specs.iter().zip(&residuals) {
            assert!(r.mean.abs() <= 3.0 * r.se + 1e-12, "alpha={alpha} {spec}: {r:?}");
        }
        let single = recursion_residual(alpha, &specs[3], budget, 19).unwrap();
        assert_eq!(single, residuals[3]);
    }
}

#[test]
fn second_moment_decreases_in_alpha() {
    let means: Vec<f64> = [0.25, 0.5, 0.75]
        .iter()
        .map(|&a| {
            moment_estimate(a, &MomentSpec::new(vec![2]).unwrap(), PdBudget::adaptive(a, 5_000), 3)
                .unwrap()
                .mean
        })
        .collect();
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
}

#[test]
fn small_alpha_has_a_dominant_atom() {
    let firsts = par_tasks(5_000, 7, |_, rng| {
        sample_pd(0.1, atom_budget(0.1), rng).unwrap().weights[0]
    });
    assert!(Estimate::from_samples(&firsts).mean > 0.8);
}

#[test]
fn partitions_normalized_sorted_positive() {
    for alpha in [0.2, 0.5, 0.9] {
        let mut rng = seed_derive(4, (alpha * 10.0) as u64);
        let p = sample_pd(alpha, atom_budget(alpha), &mut rng).unwrap();
        assert!((p.total() - 1.0).abs() < 1e-12);
        assert!(p.weights.windows(2).all(|w| w[0] >= w[1]));
        assert!(p.weights.iter().all(|&w| w > 0.0));
        assert!(p.tail_mass >= 0.0);
    }
}

#[test]
fn functional_examples() {
    let alpha = 0.5;
    let budget = PdBudget::adaptive(alpha, 10_000);
    let one = pd_functional(alpha, 3, &|_: &OverlapMatrix| 1.0, budget, 0, 2).unwrap();
    assert!((one.mean - 1.0).abs() < 1e-12);
    let coincide = pd_functional(alpha, 2, &|m: &OverlapMatrix| m.get(0, 1), budget, 0, 2).unwrap();
    assert!(coincide.z_score(0.5) < 4.0, "{coincide:?}");
    let ultra = pd_functional(alpha, 3, &ultrametric_indicator, budget, 0, 2).unwrap();
    assert!((ultra.mean - 1.0).abs() < 1e-12);
    let split = pd_functional(
        alpha,
        2,
        &|m: &OverlapMatrix| if m.get(0, 1) <= 0.5 { 1.0 } else { 0.0 },
        budget,
        0,
        2,
    )
    .unwrap();
    assert!(split.z_score(alpha) < 4.0);
}

#[test]
fn sampled_inner_sum_agrees_with_enumeration() {
    // triple and quadruple coincidence patterns
    let f = |m: &OverlapMatrix| {
        let s = m.size();
        let mut acc = 0.0;
        for i in 0..s {
            for j in i + 1..s {
                acc += m.get(i, j) * (1 + i + j) as f64;
            }
        }
        acc
    };
    let mut rng = seed_derive(99, 0);
    let p = sample_pd(0.4, 2_000, &mut rng).unwrap();
    for s in [3usize, 4] {
        let exact = exact_inner_sum(s, &f, &p);
        let draws: Vec<f64> = (0..200)
            .map(|_| sampled_inner_sum(s, &f, &p, 1_000, &mut rng))
            .collect();
        let e = Estimate::from_samples(&draws);
        assert!(e.z_score(exact) < 4.0, "s={s}: {e:?} vs {exact}");
    }
    let four = pd_functional(
        0.4,
        4,
        &|_: &OverlapMatrix| 1.0,
        PdBudget {
            samples: 10,
            atoms: 1000,
        },
        50,
        1,
    )
    .unwrap();
    assert_eq!(four.mean, 1.0);
}

#[test]
fn batched_moments_match_single() {
    let specs = MomentSpec::compositions(3);
    let budget = PdBudget {
        samples: 200,
        atoms: 1000,
    };
    let batch = logrem_core::pd::moment_estimates(0.5, &specs, budget, 3).unwrap();
    for (spec, e) in specs.iter().zip(&batch) {
        let single = moment_estimate(0.5, spec, budget, 3).unwrap();
        assert!((single.mean - e.mean).abs() < 1e-12 * e.mean.abs().max(1.0));
    }
}
