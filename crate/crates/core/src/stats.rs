//! Compensated accumulators and Monte Carlo estimates.

use rayon::prelude::*;

use crate::rng::{seed_derive, McRng};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of a slice.
pub fn kahan_sum(values: &[f64]) -> f64 {
    values.iter().copied().collect::<KahanSum>().total()
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub samples: usize,
}

impl Estimate {
    /// Mean and standard error of i.i.d. samples (two-pass, compensated).
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
                samples: 0,
            };
        }
        let mean = kahan_sum(values) / n as f64;
        let se = if n > 1 {
            let ss: KahanSum = values.iter().map(|v| (v - mean) * (v - mean)).collect();
            (ss.total() / (n - 1) as f64 / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, se, samples: n }
    }

    /// A value known exactly.
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            se: 0.0,
            samples: 0,
        }
    }

    /// Distance to `target` in units of standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.se == 0.0 {
            if self.mean == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - target).abs() / self.se
        }
    }
}

/// Sample covariance of two paired series.
pub fn covariance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = kahan_sum(a) / n;
    let mb = kahan_sum(b) / n;
    let s: KahanSum = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    s.total() / (n - 1.0)
}

/// Runs `tasks` independent tasks, task `i` seeded by `seed_derive(seed, i)`.
///
/// Results come back in task order whatever the thread count, so any fold
/// over them is reproducible.
pub fn par_tasks<T, F>(tasks: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut McRng) -> T + Sync,
{
    (0..tasks)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed_derive(seed, i as u64);
            f(i, &mut rng)
        })
        .collect()
}
