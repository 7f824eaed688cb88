use crate::error::{Error, Result};

/// The discrete circle `{0, 1/N, ..., (N-1)/N}` with variance parameter `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    n: usize,
    sigma: f64,
}

impl LatticeSpec {
    pub fn new(n: usize, sigma: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidLattice(format!(
                "need at least 4 sites so that 1/N < 1/2, got {n}"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidLattice(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(Self { n, sigma })
    }

    /// Unit-variance-parameter lattice.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, 1.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Lattice spacing, `1/N`.
    pub fn eps(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn log_n(&self) -> f64 {
        (self.n as f64).ln()
    }

    /// Height `eps^t` of the strip boundary at scale `t`.
    pub fn height(&self, t: f64) -> f64 {
        (-t * self.log_n()).exp()
    }
}

/// Integer circle gap `min(|x-y|, n-|x-y|)`.
#[inline]
pub fn circle_gap(x: usize, y: usize, n: usize) -> usize {
    debug_assert!(x < n && y < n);
    let d = x.abs_diff(y);
    d.min(n - d)
}

/// Distance between sites `x/n` and `y/n` on the unit circle.
#[inline]
pub fn circle_distance(x: usize, y: usize, n: usize) -> f64 {
    circle_gap(x, y, n) as f64 / n as f64
}

/// Overlap `-log||x-y|| / log n`; equal sites have overlap 1.
///
/// Evaluated as `1 - log(gap)/log(n)` on the integer gap so that
/// nearest neighbours give exactly 1.
#[inline]
pub fn overlap(x: usize, y: usize, n: usize) -> f64 {
    let gap = circle_gap(x, y, n);
    overlap_from_gap(gap, n)
}

#[inline]
pub fn overlap_from_gap(gap: usize, n: usize) -> f64 {
    if gap <= 1 {
        1.0
    } else {
        1.0 - (gap as f64).ln() / (n as f64).ln()
    }
}
