//! Adaptive Simpson quadrature, used as an independent check of the
//! closed-form kernels.

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    refine(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson over `[a, b]` split at the given interior breakpoints.
/// An infinite `b` is handled by the substitution `y = 1/t` on the last
/// piece, which must start at a positive point.
pub fn integrate_piecewise<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut points = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&p| p > a && p < b).collect();
    inner.sort_by(|x, y| x.total_cmp(y));
    inner.dedup();
    points.extend(inner);
    points.push(b);
    let pieces = (points.len() - 1) as f64;
    points
        .windows(2)
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            if hi.is_infinite() {
                assert!(lo > 0.0, "infinite piece must start at a positive point");
                let g = |t: f64| {
                    if t == 0.0 {
                        limit_at_zero(f, lo)
                    } else {
                        f(1.0 / t) / (t * t)
                    }
                };
                adaptive_simpson(&g, 0.0, 1.0 / lo, tol / pieces)
            } else {
                adaptive_simpson(f, lo, hi, tol / pieces)
            }
        })
        .sum()
}

// y^2 f(y) as y -> ∞, extrapolated from two far points.
fn limit_at_zero<F: Fn(f64) -> f64>(f: &F, lo: f64) -> f64 {
    let y1 = lo.max(1.0) * 1e8;
    let y2 = 2.0 * y1;
    let (g1, g2) = (y1 * y1 * f(y1), y2 * y2 * f(y2));
    2.0 * g2 - g1
}

/// Quadrature of the strip covariance integrand, split where it is not smooth.
pub fn strip_covariance_quadrature(ell: f64, lo: f64, hi: f64, sigma2: f64, tol: f64) -> f64 {
    let integrand = |y: f64| {
        let width = y.min(0.5) - ell;
        if width > 0.0 {
            width / (y * y)
        } else {
            0.0
        }
    };
    sigma2 * integrate_piecewise(&integrand, lo, hi, &[ell, 0.5], tol / sigma2.max(1.0))
}
