//! Fourier-side field representation and the pointwise (dealiased) calculus.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::transform_2d;
use crate::grid::{bracket, norm_sq, GridSpec, Mode};

/// Hermitian-symmetric coefficient array of a real field on the torus,
/// stored on the full `M x M` mode lattice in FFT order. `band` is a
/// guaranteed support radius: coefficients vanish for `|n| > band`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    grid: GridSpec,
    band: u32,
    coeffs: Vec<Complex64>,
}

impl FourierField {
    pub fn zeros(grid: GridSpec) -> Self {
        FourierField { grid, band: 0, coeffs: vec![Complex64::default(); grid.lattice_len()] }
    }

    /// Constant field with value `c`.
    pub fn constant(grid: GridSpec, c: f64) -> Self {
        let mut f = Self::zeros(grid);
        f.coeffs[0] = Complex64::new(c, 0.0);
        f
    }

    /// Build from explicit mode entries. The caller supplies one entry per
    /// mode; conjugate counterparts are not filled in automatically.
    pub fn from_modes(grid: GridSpec, entries: &[(Mode, Complex64)]) -> Result<Self> {
        let mut f = Self::zeros(grid);
        for &(n, c) in entries {
            f.set_coeff(n, c)?;
        }
        Ok(f)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn band(&self) -> u32 {
        self.band
    }

    /// Raw coefficient lattice, row-major FFT order.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub(crate) fn from_raw(grid: GridSpec, band: u32, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.lattice_len());
        FourierField { grid, band, coeffs }
    }

    pub(crate) fn set_band(&mut self, band: u32) {
        self.band = band.min(self.grid.max_band());
    }

    pub fn coeff(&self, n: Mode) -> Complex64 {
        match self.grid.flat_index(n) {
            Some(idx) => self.coeffs[idx],
            None => Complex64::default(),
        }
    }

    pub fn set_coeff(&mut self, n: Mode, c: Complex64) -> Result<()> {
        let idx = self.grid.flat_index(n).ok_or_else(|| {
            Error::DimensionMismatch(format!("mode {n:?} not representable on M = {}", self.grid.grid_size))
        })?;
        self.coeffs[idx] = c;
        let radius = (norm_sq(n) as f64).sqrt().ceil() as u32;
        if radius > self.band && c != Complex64::default() {
            self.band = radius;
        }
        Ok(())
    }

    /// Frequency projection: zero all coefficients with `|n| > cutoff`.
    /// Idempotent and self-adjoint for the coefficient inner product.
    pub fn project(&self, cutoff: u32) -> Self {
        let mut out = self.clone();
        out.project_in_place(cutoff);
        out
    }

    pub(crate) fn project_in_place(&mut self, cutoff: u32) {
        let c2 = (cutoff as i64) * (cutoff as i64);
        let m = self.grid.grid_size as usize;
        for idx in 0..self.coeffs.len() {
            let n1 = self.grid.freq_of_index(idx / m);
            let n2 = self.grid.freq_of_index(idx % m);
            if n1 * n1 + n2 * n2 > c2 {
                self.coeffs[idx] = Complex64::default();
            }
        }
        self.band = self.band.min(cutoff);
    }

    /// Transform physical samples on the `M x M` grid `x_j = 2 pi j / M`
    /// into coefficients; the constant grid `c` maps to coefficient `c` at
    /// the origin. Hermitian symmetry is enforced on the result.
    pub fn analyze(grid: GridSpec, values: &[f64]) -> Result<Self> {
        if values.len() != grid.lattice_len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} grid samples, got {}",
                grid.lattice_len(),
                values.len()
            )));
        }
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        transform_2d(&mut buf, grid.grid_size as usize, false);
        let scale = 1.0 / grid.lattice_len() as f64;
        for c in &mut buf {
            *c *= scale;
        }
        let mut f = FourierField { band: grid.max_band(), grid, coeffs: buf };
        f.symmetrize();
        Ok(f)
    }

    /// Evaluate the field on the physical grid. Inverse of `analyze` up to
    /// round-off for any real input.
    pub fn synthesize(&self) -> Vec<f64> {
        self.synthesize_complex().iter().map(|c| c.re).collect()
    }

    pub(crate) fn synthesize_complex(&self) -> Vec<Complex64> {
        let mut buf = self.coeffs.clone();
        transform_2d(&mut buf, self.grid.grid_size as usize, true);
        buf
    }

    /// Average `u(n)` with `conj(u(-n))`, making the physical field exactly
    /// real. Round trips through the grid call this.
    pub fn symmetrize(&mut self) {
        let m = self.grid.grid_size as usize;
        for k1 in 0..m {
            let r1 = if k1 == 0 { 0 } else { m - k1 };
            for k2 in 0..m {
                let r2 = if k2 == 0 { 0 } else { m - k2 };
                let a = k1 * m + k2;
                let b = r1 * m + r2;
                if a > b {
                    continue;
                }
                let avg = 0.5 * (self.coeffs[a] + self.coeffs[b].conj());
                self.coeffs[a] = avg;
                self.coeffs[b] = avg.conj();
            }
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let m = self.grid.grid_size as usize;
        for k1 in 0..m {
            let r1 = if k1 == 0 { 0 } else { m - k1 };
            for k2 in 0..m {
                let r2 = if k2 == 0 { 0 } else { m - k2 };
                let diff = self.coeffs[k1 * m + k2] - self.coeffs[r1 * m + r2].conj();
                if diff.norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Sobolev norm `(sum <n>^{2s} |u(n)|^2)^{1/2}`; `s = 0` is the `L^2`
    /// norm under the normalized torus measure.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let mut total = 0.0;
        for (idx, n) in self.grid.modes() {
            let c = self.coeffs[idx];
            if c != Complex64::default() {
                total += bracket(n).powf(2.0 * s) * c.norm_sqr();
            }
        }
        total.sqrt()
    }

    /// Coefficient inner product `sum u(n) conj(v(n))`; real for Hermitian
    /// pairs, equal to the normalized `L^2` pairing.
    pub fn l2_inner(&self, other: &FourierField) -> Result<f64> {
        self.check_same_grid(other)?;
        let mut total = Complex64::default();
        for (a, b) in self.coeffs.iter().zip(&other.coeffs) {
            total += a * b.conj();
        }
        Ok(total.re)
    }

    fn check_same_grid(&self, other: &FourierField) -> Result<()> {
        if self.grid.grid_size != other.grid.grid_size {
            return Err(Error::DimensionMismatch(format!(
                "grids differ: {} vs {}",
                self.grid.grid_size, other.grid.grid_size
            )));
        }
        Ok(())
    }

    /// Copy the coefficients onto a lattice of size `new_size`. Shrinking
    /// below the band is an error.
    pub fn regrid(&self, new_size: u32) -> Result<Self> {
        if new_size == self.grid.grid_size {
            return Ok(self.clone());
        }
        let new_grid = GridSpec { grid_size: new_size, ..self.grid };
        if self.band > new_grid.max_band() {
            return Err(Error::BandLimit(format!(
                "band {} does not fit on a lattice of size {}",
                self.band, new_size
            )));
        }
        let mut out = FourierField::zeros(new_grid);
        let b = self.band as i64;
        for n1 in -b..=b {
            for n2 in -b..=b {
                if n1 * n1 + n2 * n2 > b * b {
                    continue;
                }
                let c = self.coeff([n1, n2]);
                if c != Complex64::default() {
                    let idx = new_grid.flat_index([n1, n2]).expect("band checked");
                    out.coeffs[idx] = c;
                }
            }
        }
        out.band = self.band;
        Ok(out)
    }

    /// Dealiased pointwise polynomial `x -> sum_k c_k f(x)^k`, exact on all
    /// modes of the mathematical result (its band is `deg * band(f)`).
    /// Enlarges the working grid internally when the stored lattice cannot
    /// guarantee alias-free output.
    pub fn pointwise_polynomial(&self, poly_coeffs: &[f64]) -> Result<FourierField> {
        let deg = polynomial_degree(poly_coeffs);
        let out_band = deg * self.band;
        self.pointwise_polynomial_within(poly_coeffs, out_band)
    }

    /// Dealiased pointwise polynomial reported on modes `|n| <= out_band`
    /// only (zero beyond). Re-grids internally so that the reported window
    /// is alias-free; the result lives on the working grid.
    pub fn pointwise_polynomial_within(
        &self,
        poly_coeffs: &[f64],
        out_band: u32,
    ) -> Result<FourierField> {
        let deg = polynomial_degree(poly_coeffs);
        if deg > self.grid.wick_degree() {
            return Err(Error::Dealiasing(format!(
                "polynomial degree {} exceeds the grid guarantee 2m+2 = {}",
                deg,
                self.grid.wick_degree()
            )));
        }
        let needed = out_band + deg * self.band + 1;
        let work = if self.grid.grid_size >= needed {
            self.clone()
        } else {
            let size = if needed % 2 == 0 { needed + 1 } else { needed };
            self.regrid(size)?
        };
        let mut phys = work.synthesize();
        for v in &mut phys {
            *v = eval_polynomial(poly_coeffs, *v);
        }
        let mut out = FourierField::analyze(work.grid, &phys)?;
        out.project_in_place(out_band.min(deg * self.band));
        Ok(out)
    }

    /// Dealiased pointwise product of several fields, exact on
    /// `|n| <= out_band`. All factors are brought onto a common working grid.
    pub fn pointwise_product_within(factors: &[&FourierField], out_band: u32) -> Result<FourierField> {
        let first = factors
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty factor list".into()))?;
        let total_band: u32 = factors.iter().map(|f| f.band).sum();
        let needed = out_band + total_band + 1;
        let mut size = factors.iter().map(|f| f.grid.grid_size).max().unwrap();
        if size < needed {
            size = if needed % 2 == 0 { needed + 1 } else { needed };
        }
        let grid = GridSpec { grid_size: size, ..first.grid };
        let mut phys = vec![1.0f64; grid.lattice_len()];
        for f in factors {
            let on_grid = f.regrid(size)?;
            for (p, v) in phys.iter_mut().zip(on_grid.synthesize()) {
                *p *= v;
            }
        }
        let mut out = FourierField::analyze(grid, &phys)?;
        out.project_in_place(out_band.min(total_band));
        Ok(out)
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `self + scale * other`, in place. Grids must match.
    pub fn axpy(&mut self, scale: f64, other: &FourierField) -> Result<()> {
        self.check_same_grid(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += scale * b;
        }
        self.band = self.band.max(other.band);
        Ok(())
    }

    pub fn scaled(&self, scale: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c *= scale;
        }
        out
    }

    pub fn sub(&self, other: &FourierField) -> Result<FourierField> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn add(&self, other: &FourierField) -> Result<FourierField> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    /// Apply a real multiplier `lambda(n)` to every coefficient.
    pub fn apply_multiplier(&self, multiplier: impl Fn(Mode) -> f64) -> Self {
        let mut out = self.clone();
        for (idx, n) in self.grid.modes() {
            out.coeffs[idx] *= multiplier(n);
        }
        out
    }

    /// Tightest support radius consistent with the stored coefficients.
    pub fn measured_band(&self) -> u32 {
        let mut max_sq: i64 = 0;
        for (idx, n) in self.grid.modes() {
            if self.coeffs[idx] != Complex64::default() {
                max_sq = max_sq.max(norm_sq(n));
            }
        }
        (max_sq as f64).sqrt().ceil() as u32
    }
}

/// Position/velocity pair evolved by the Hamiltonian flow.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub u: FourierField,
    pub v: FourierField,
}

impl PhaseState {
    pub fn new(u: FourierField, v: FourierField) -> Result<Self> {
        if u.grid() != v.grid() {
            return Err(Error::DimensionMismatch(
                "position and velocity must share one grid".into(),
            ));
        }
        Ok(PhaseState { u, v })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        PhaseState { u: FourierField::zeros(grid), v: FourierField::zeros(grid) }
    }

    pub fn grid(&self) -> &GridSpec {
        self.u.grid()
    }
}

fn polynomial_degree(coeffs: &[f64]) -> u32 {
    coeffs
        .iter()
        .rposition(|&c| c != 0.0)
        .map(|d| d as u32)
        .unwrap_or(0)
}

fn eval_polynomial(coeffs: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}
