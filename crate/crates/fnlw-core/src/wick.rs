//! Hermite polynomials with variance parameter and Wick-ordered powers of
//! band-limited fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FourierField;
use crate::grid::{bracket, GridSpec};

/// Truncated variance of the free field at a point:
/// `sigma_{alpha,N} = sum_{|n| <= N} <n>^{-2 alpha}`. Exact lattice sum,
/// never the `N^{2-2 alpha}` asymptotic.
pub fn sigma_variance(alpha: f64, cutoff: u32) -> f64 {
    let b = cutoff as i64;
    let mut total = 0.0;
    for n1 in -b..=b {
        for n2 in -b..=b {
            if n1 * n1 + n2 * n2 <= b * b {
                total += bracket([n1, n2]).powf(-2.0 * alpha);
            }
        }
    }
    total
}

/// Hermite polynomial `H_k(x; sigma)` from the three-term recurrence
/// `H_{k+1} = x H_k - k sigma H_{k-1}`, `H_0 = 1`, `H_1 = x`. Matches the
/// coefficient of `t^k/k!` in `exp(t x - sigma t^2 / 2)`.
pub fn hermite(k: u32, x: f64, sigma: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = x;
    for j in 1..k {
        let next = x * cur - (j as f64) * sigma * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Monomial coefficients of `H_k(x; sigma)` in ascending powers of `x`.
pub fn hermite_coefficients(k: u32, sigma: f64) -> Vec<f64> {
    let mut prev = vec![1.0];
    if k == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 1.0];
    for j in 1..k {
        let mut next = vec![0.0; j as usize + 2];
        for (p, &c) in cur.iter().enumerate() {
            next[p + 1] += c;
        }
        for (p, &c) in prev.iter().enumerate() {
            next[p] -= (j as f64) * sigma * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// Global minimum of `H_k(x; 1)` over the real line, for even `k >= 2`.
/// Critical points are the roots of `H_{k-1}` (since `d/dx H_k = k H_{k-1}`),
/// located by interlacing bisection.
pub fn hermite_min(k: u32) -> Result<f64> {
    if k < 2 || k % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "hermite_min requires an even degree >= 2, got {k}"
        )));
    }
    let critical = hermite_roots(k - 1);
    let min = critical
        .iter()
        .map(|&x| hermite(k, x, 1.0))
        .fold(f64::INFINITY, f64::min);
    Ok(min)
}

/// All real roots of `H_k(x; 1)`, ascending. Roots of successive degrees
/// interlace, so each level is found by bisection between the previous
/// level's roots plus an outer bound.
fn hermite_roots(k: u32) -> Vec<f64> {
    let mut roots = vec![0.0f64];
    for j in 2..=k {
        let bound = (4.0 * j as f64 + 2.0).sqrt() + 1.0;
        let mut brackets = Vec::with_capacity(j as usize + 1);
        brackets.push(-bound);
        brackets.extend_from_slice(&roots);
        brackets.push(bound);
        let mut next = Vec::with_capacity(j as usize);
        for w in brackets.windows(2) {
            next.push(bisect_root(|x| hermite(j, x, 1.0), w[0], w[1]));
        }
        roots = next;
    }
    roots
}

fn bisect_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    debug_assert!(flo * f(hi) <= 0.0, "no sign change in bracket");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if fmid == 0.0 {
            return mid;
        }
        if flo * fmid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fmid;
        }
        if hi - lo < 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Renormalization bundle: `(alpha, m, N)` plus the matching truncated
/// variance. Every Wick operation reads `sigma` from here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WickContext {
    pub alpha: f64,
    /// Nonlinearity index `m`.
    pub nonlin: u32,
    /// Truncation radius `N`.
    pub cutoff: u32,
    /// `sigma_{alpha,N}`, recomputable from the other fields.
    pub sigma: f64,
}

impl WickContext {
    pub fn new(alpha: f64, nonlin: u32, cutoff: u32) -> Self {
        WickContext { alpha, nonlin, cutoff, sigma: sigma_variance(alpha, cutoff) }
    }

    pub fn for_grid(grid: &GridSpec) -> Self {
        Self::new(grid.alpha, grid.nonlin, grid.cutoff)
    }

    pub fn wick_degree(&self) -> u32 {
        2 * self.nonlin + 2
    }

    pub fn kick_degree(&self) -> u32 {
        2 * self.nonlin + 1
    }

    /// Minimal alias-free grid for this truncation.
    pub fn grid(&self) -> GridSpec {
        GridSpec {
            cutoff: self.cutoff,
            grid_size: GridSpec::min_grid_size(self.cutoff, self.nonlin),
            alpha: self.alpha,
            nonlin: self.nonlin,
        }
    }
}

fn check_band(u: &FourierField, ctx: &WickContext) -> Result<()> {
    if u.band() > ctx.cutoff {
        // the tracked band is a coarse bound; accept if the content actually fits
        if u.measured_band() > ctx.cutoff {
            return Err(Error::BandLimit(format!(
                "field carries modes beyond the truncation radius {}",
                ctx.cutoff
            )));
        }
    }
    Ok(())
}

/// Wick power `:u^k:(x) = H_k(u(x); sigma)` of a band-limited field,
/// dealiased on the full output band `k * band(u)`. For `k = 1` this is the
/// identity.
pub fn wick_power(u: &FourierField, k: u32, ctx: &WickContext) -> Result<FourierField> {
    check_band(u, ctx)?;
    if k > ctx.wick_degree() {
        return Err(Error::Dealiasing(format!(
            "Wick degree {k} exceeds the supported maximum 2m+2 = {}",
            ctx.wick_degree()
        )));
    }
    if k == 1 {
        return Ok(u.clone());
    }
    u.pointwise_polynomial(&hermite_coefficients(k, ctx.sigma))
}

/// Wick power reported only on `|n| <= out_band`, evaluated on the field's
/// own grid. Errors if that grid cannot guarantee the window alias-free.
pub(crate) fn wick_power_within(
    u: &FourierField,
    k: u32,
    ctx: &WickContext,
    out_band: u32,
) -> Result<FourierField> {
    check_band(u, ctx)?;
    if k > ctx.wick_degree() {
        return Err(Error::Dealiasing(format!(
            "Wick degree {k} exceeds the supported maximum 2m+2 = {}",
            ctx.wick_degree()
        )));
    }
    u.pointwise_polynomial_within(&hermite_coefficients(k, ctx.sigma), out_band)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn sigma_small_cases() {
        // N = 0: only the origin contributes <0>^{-2a} = 1
        assert_eq!(sigma_variance(0.7, 0), 1.0);
        // N = 1, five lattice points: 1 + 4 <e_1>^{-2 alpha}
        assert!((sigma_variance(1.0, 1) - 3.0).abs() < 1e-13);
        let expect = 1.0 + 4.0 * 2f64.powf(-0.5);
        assert!((sigma_variance(0.5, 1) - expect).abs() < 1e-12);
        assert!((expect - 3.82842712).abs() < 1e-7);
    }

    #[test]
    fn sigma_monotone_and_at_least_one() {
        let mut prev = 0.0;
        for n in 0..10 {
            let s = sigma_variance(0.8, n);
            assert!(s >= 1.0);
            assert!(s >= prev);
            prev = s;
        }
    }

    #[test]
    fn sigma_growth_rate() {
        // sigma grows like N^{2-2 alpha} plus a constant; increments between
        // doubled cutoffs cancel the constant, so their ratio approaches
        // 2^{2-2 alpha}
        for alpha in [0.5, 0.8, 0.95] {
            let s1 = sigma_variance(alpha, 64);
            let s2 = sigma_variance(alpha, 128);
            let s3 = sigma_variance(alpha, 256);
            let ratio = (s3 - s2) / (s2 - s1);
            let theory = 2f64.powf(2.0 - 2.0 * alpha);
            assert!(
                (ratio - theory).abs() < 0.1 * theory,
                "alpha={alpha}: increment ratio {ratio} vs {theory}"
            );
        }
    }

    #[test]
    fn hermite_table() {
        for &(x, sigma) in &[(0.3, 1.7), (-1.2, 0.4), (2.0, 3.0)] {
            assert_eq!(hermite(0, x, sigma), 1.0);
            assert_eq!(hermite(1, x, sigma), x);
            assert!((hermite(2, x, sigma) - (x * x - sigma)).abs() < 1e-12);
            assert!((hermite(3, x, sigma) - (x * x * x - 3.0 * sigma * x)).abs() < 1e-12);
            let h4 = x.powi(4) - 6.0 * sigma * x * x + 3.0 * sigma * sigma;
            assert!((hermite(4, x, sigma) - h4).abs() < 1e-11 * (1.0 + h4.abs()));
        }
        // H_4(0; 1) = 3
        assert!((hermite(4, 0.0, 1.0) - 3.0).abs() < 1e-13);
    }

    #[test]
    fn hermite_coefficients_match_eval() {
        for k in 0..=8u32 {
            let coeffs = hermite_coefficients(k, 0.9);
            for &x in &[-1.7, 0.0, 0.6, 2.3] {
                let direct = hermite(k, x, 0.9);
                let horner: f64 =
                    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c);
                assert!((direct - horner).abs() < 1e-9 * (1.0 + direct.abs()));
            }
        }
    }

    #[test]
    fn hermite_min_small_degrees() {
        assert!((hermite_min(2).unwrap() + 1.0).abs() < 1e-12);
        assert!((hermite_min(4).unwrap() + 6.0).abs() < 1e-10);
        // degree 6: cross-check the root-based minimum with a dense scan
        let m6 = hermite_min(6).unwrap();
        let scan = (0..200_000)
            .map(|i| -6.0 + 12.0 * i as f64 / 199_999.0)
            .map(|x| hermite(6, x, 1.0))
            .fold(f64::INFINITY, f64::min);
        assert!((m6 - scan).abs() < 1e-6 * m6.abs());
        assert!(m6 < 0.0);
        assert!(hermite_min(3).is_err());
    }

    #[test]
    fn wick_power_basics() {
        let ctx = WickContext { alpha: 0.9, nonlin: 1, cutoff: 1, sigma: 1.0 };
        let grid = ctx.grid();
        // zero field, k = 2: constant -sigma
        let z = FourierField::zeros(grid);
        let w = wick_power(&z, 2, &ctx).unwrap();
        assert!((w.coeff([0, 0]).re + 1.0).abs() < 1e-13);

        // k = 1 returns the field unchanged
        let mut f = FourierField::zeros(grid);
        f.set_coeff([1, 0], Complex64::new(0.4, 0.1)).unwrap();
        f.set_coeff([-1, 0], Complex64::new(0.4, -0.1)).unwrap();
        assert_eq!(wick_power(&f, 1, &ctx).unwrap(), f);
    }

    #[test]
    fn wick_square_of_cosine() {
        // u = 2 cos(x1): :u^2: = (2 - sigma) + 2 cos(2 x1)
        let ctx = WickContext { alpha: 0.9, nonlin: 1, cutoff: 1, sigma: 1.3 };
        let grid = ctx.grid();
        let mut f = FourierField::zeros(grid);
        f.set_coeff([1, 0], Complex64::new(1.0, 0.0)).unwrap();
        f.set_coeff([-1, 0], Complex64::new(1.0, 0.0)).unwrap();
        let w = wick_power(&f, 2, &ctx).unwrap();
        assert!((w.coeff([0, 0]).re - (2.0 - 1.3)).abs() < 1e-12);
        assert!((w.coeff([2, 0]).re - 1.0).abs() < 1e-12);
        assert!((w.coeff([-2, 0]).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn band_limit_rejected() {
        let ctx = WickContext { alpha: 0.9, nonlin: 1, cutoff: 1, sigma: 1.0 };
        let grid = GridSpec::with_min_grid(2, 0.9, 1).unwrap();
        let mut f = FourierField::zeros(grid);
        f.set_coeff([2, 0], Complex64::new(1.0, 0.0)).unwrap();
        f.set_coeff([-2, 0], Complex64::new(1.0, 0.0)).unwrap();
        assert!(wick_power(&f, 2, &ctx).is_err());
    }
}
