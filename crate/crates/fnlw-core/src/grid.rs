//! Mode lattice bookkeeping for the 2-torus.
//!
//! Conventions: the torus is `[0, 2pi)^2` with normalized Haar measure
//! (total mass 1), so the characters `e^{i n.x}`, `n` in `Z^2`, are
//! orthonormal in `L^2`. Coefficients are stored on a full `M x M` lattice
//! in FFT order: storage index `k` in `0..M` holds frequency `k` for
//! `k <= (M-1)/2` and `k - M` otherwise, row-major as `k1 * M + k2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lattice mode `n = (n1, n2)` in `Z^2`.
pub type Mode = [i64; 2];

/// Japanese bracket `<n> = sqrt(1 + |n|^2)`, the dispersion symbol at order one.
pub fn bracket(n: Mode) -> f64 {
    ((1 + n[0] * n[0] + n[1] * n[1]) as f64).sqrt()
}

/// `|n|^2` as an integer, for exact ball membership tests.
pub fn norm_sq(n: Mode) -> i64 {
    n[0] * n[0] + n[1] * n[1]
}

/// Discretization parameters: truncation radius `N`, physical grid points per
/// dimension `M`, dispersion exponent `alpha`, and nonlinearity index `m`
/// (the equation carries the power `u^{2m+1}`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Frequency-truncation radius `N`; modes with `|n| <= N` are kept.
    pub cutoff: u32,
    /// Physical grid points per dimension `M`.
    pub grid_size: u32,
    /// Fractional dispersion exponent, `0 < alpha < 1`.
    pub alpha: f64,
    /// Nonlinearity index `m >= 1`; the nonlinearity degree is `2m+1`.
    pub nonlin: u32,
}

impl GridSpec {
    /// Grid with invariants checked: `M >= (2m+2)N + 1` so that pointwise
    /// polynomials of degree up to `2m+2` of a band-`N` field are alias-free
    /// where the dynamics and the potential need them.
    pub fn new(cutoff: u32, grid_size: u32, alpha: f64, nonlin: u32) -> Result<Self> {
        let spec = GridSpec { cutoff, grid_size, alpha, nonlin };
        spec.validate()?;
        Ok(spec)
    }

    /// Smallest admissible grid for the given truncation: `M = (2m+2)N + 1`.
    /// This is always odd, which keeps the mode lattice symmetric.
    pub fn with_min_grid(cutoff: u32, alpha: f64, nonlin: u32) -> Result<Self> {
        Self::new(cutoff, Self::min_grid_size(cutoff, nonlin), alpha, nonlin)
    }

    pub fn min_grid_size(cutoff: u32, nonlin: u32) -> u32 {
        (2 * nonlin + 2) * cutoff + 1
    }

    /// Representation-only grid holding band-`band` fields exactly
    /// (`M = 2 band + 1`). Carries no dealiasing guarantee for products;
    /// pointwise operations re-grid as needed.
    pub fn for_band(band: u32, alpha: f64, nonlin: u32) -> Self {
        GridSpec { cutoff: band, grid_size: 2 * band + 1, alpha, nonlin }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidGrid(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.nonlin < 1 {
            return Err(Error::InvalidGrid("nonlinearity index m must be >= 1".into()));
        }
        if self.grid_size < Self::min_grid_size(self.cutoff, self.nonlin) {
            return Err(Error::InvalidGrid(format!(
                "grid size {} below the dealiasing requirement (2m+2)N+1 = {} for N = {}, m = {}",
                self.grid_size,
                Self::min_grid_size(self.cutoff, self.nonlin),
                self.cutoff,
                self.nonlin
            )));
        }
        Ok(())
    }

    /// Degree of the Wick monomial inside the Hamiltonian, `2m+2`.
    pub fn wick_degree(&self) -> u32 {
        2 * self.nonlin + 2
    }

    /// Degree of the nonlinear force, `2m+1`.
    pub fn kick_degree(&self) -> u32 {
        2 * self.nonlin + 1
    }

    pub fn lattice_len(&self) -> usize {
        (self.grid_size as usize) * (self.grid_size as usize)
    }

    /// Frequency carried by storage index `k` along one axis.
    pub fn freq_of_index(&self, k: usize) -> i64 {
        let m = self.grid_size as i64;
        let k = k as i64;
        if k <= (m - 1) / 2 {
            k
        } else {
            k - m
        }
    }

    /// Storage index along one axis for the frequency `n`; `None` if the
    /// frequency does not fit on this lattice.
    pub fn index_of_freq(&self, n: i64) -> Option<usize> {
        let m = self.grid_size as i64;
        let lo = -(m / 2);
        let hi = (m - 1) / 2;
        if n < lo || n > hi {
            return None;
        }
        Some(if n >= 0 { n as usize } else { (n + m) as usize })
    }

    /// Flat storage index of a mode, row-major `k1 * M + k2`.
    pub fn flat_index(&self, n: Mode) -> Option<usize> {
        let k1 = self.index_of_freq(n[0])?;
        let k2 = self.index_of_freq(n[1])?;
        Some(k1 * self.grid_size as usize + k2)
    }

    /// Largest frequency radius representable on this lattice without folding.
    pub fn max_band(&self) -> u32 {
        ((self.grid_size - 1) / 2) as u32
    }

    /// Iterate all lattice entries as `(flat_index, mode)`.
    pub fn modes(&self) -> impl Iterator<Item = (usize, Mode)> + '_ {
        let m = self.grid_size as usize;
        (0..m * m).map(move |idx| {
            let n1 = self.freq_of_index(idx / m);
            let n2 = self.freq_of_index(idx % m);
            (idx, [n1, n2])
        })
    }
}

/// Whether `n` lies in the positive half of the fixed lattice half-ordering:
/// `n2 > 0`, or `n2 = 0` and `n1 > 0`. Exactly one of `n`, `-n` is positive
/// for `n != 0`.
pub fn is_positive_half(n: Mode) -> bool {
    n[1] > 0 || (n[1] == 0 && n[0] > 0)
}

/// Positive-half modes with `|n| <= band`, sorted by `(|n|^2, n2, n1)`.
/// The listing for a smaller band is a prefix of the listing for any larger
/// band, so seeded Gaussian draws indexed by this order are consistent
/// across truncations.
pub fn half_modes(band: u32) -> Vec<Mode> {
    let b = band as i64;
    let mut out = Vec::new();
    for n2 in 0..=b {
        for n1 in -b..=b {
            let n = [n1, n2];
            if norm_sq(n) <= b * b && is_positive_half(n) {
                out.push(n);
            }
        }
    }
    out.sort_by_key(|&n| (norm_sq(n), n[1], n[0]));
    out
}

/// All modes with `|n| <= band` (both halves plus the origin).
pub fn ball_modes(band: u32) -> Vec<Mode> {
    let b = band as i64;
    let mut out = Vec::new();
    for n1 in -b..=b {
        for n2 in -b..=b {
            if norm_sq([n1, n2]) <= b * b {
                out.push([n1, n2]);
            }
        }
    }
    out
}

/// Number of lattice points in the closed ball of radius `band`.
pub fn ball_size(band: u32) -> usize {
    ball_modes(band).len()
}

/// Brute-force discrete convolution sum
/// `sum_{n1 + n2 = n, |n1|,|n2| <= cutoff} <n1>^{-a} <n2>^{-b}`,
/// used as a numeric oracle for convolution bounds of the form
/// `<n>^{2-a-b}` when `a + b > 2` and `a, b < 2`.
pub fn discrete_conv_sum(n: Mode, a: f64, b: f64, cutoff: u32) -> f64 {
    let c = cutoff as i64;
    let mut total = 0.0;
    for m1 in -c..=c {
        for m2 in -c..=c {
            let n1 = [m1, m2];
            if norm_sq(n1) > c * c {
                continue;
            }
            let n2 = [n[0] - m1, n[1] - m2];
            if norm_sq(n2) > c * c {
                continue;
            }
            total += bracket(n1).powf(-a) * bracket(n2).powf(-b);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_values() {
        assert_eq!(bracket([0, 0]), 1.0);
        assert!((bracket([1, 0]) - 2f64.sqrt()).abs() < 1e-12);
        assert!((bracket([3, 4]) - 26f64.sqrt()).abs() < 1e-12);
        assert!(bracket([-7, 2]) >= 1.0);
    }

    #[test]
    fn grid_invariants() {
        let g = GridSpec::with_min_grid(4, 0.9, 1).unwrap();
        assert_eq!(g.grid_size, 17);
        assert!(GridSpec::new(4, 16, 0.9, 1).is_err());
        assert!(GridSpec::new(4, 17, 1.5, 1).is_err());
        assert!(GridSpec::new(4, 17, 0.9, 0).is_err());
    }

    #[test]
    fn index_round_trip() {
        let g = GridSpec::with_min_grid(2, 0.5, 1).unwrap();
        for (idx, n) in g.modes() {
            assert_eq!(g.flat_index(n), Some(idx));
        }
        assert_eq!(g.index_of_freq(1000), None);
    }

    #[test]
    fn half_ordering_is_prefix_stable() {
        let small = half_modes(3);
        let large = half_modes(6);
        assert_eq!(&large[..small.len()], &small[..]);
        for n in &small {
            assert!(is_positive_half(*n));
            assert!(!is_positive_half([-n[0], -n[1]]));
        }
        // exactly half of the non-origin ball
        assert_eq!(2 * small.len() + 1, ball_size(3));
    }

    #[test]
    fn conv_sum_converges_when_summable() {
        // a + b > 2: increments shrink as the cutoff grows
        let s1 = discrete_conv_sum([0, 0], 3.0, 3.0, 10);
        let s2 = discrete_conv_sum([0, 0], 3.0, 3.0, 20);
        let s3 = discrete_conv_sum([0, 0], 3.0, 3.0, 40);
        assert!(s2 - s1 > 0.0);
        assert!(s3 - s2 < s2 - s1);
        assert!(s3 - s2 < 1e-2);

        // a + b <= 2: grows without bound
        let d1 = discrete_conv_sum([0, 0], 1.0, 1.0, 10);
        let d2 = discrete_conv_sum([0, 0], 1.0, 1.0, 20);
        let d3 = discrete_conv_sum([0, 0], 1.0, 1.0, 40);
        assert!(d3 - d2 > d2 - d1);
    }

    #[test]
    fn conv_sum_ratio_bounded() {
        // a = b = 1.9: the sum is dominated by <n>^{2-a-b} with a bounded ratio
        let a = 1.9;
        let mut max_ratio: f64 = 0.0;
        for n1 in [0i64, 1, 2, 5, 10, 20] {
            let n = [n1, 0];
            let s = discrete_conv_sum(n, a, a, 200);
            let ratio = s / bracket(n).powf(2.0 - 2.0 * a);
            max_ratio = max_ratio.max(ratio);
        }
        assert!(max_ratio < 50.0, "ratio {max_ratio} unexpectedly large");
    }
}
