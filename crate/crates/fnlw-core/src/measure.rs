//! Sampling from the free-field measure, the renormalized potential, its
//! exact covariance oracle, and the tail / chaos diagnostics.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FourierField, PhaseState};
use crate::grid::{bracket, half_modes, GridSpec};
use crate::stats::{mean_var, ols_slope, summarize, EnsembleReport};
use crate::wick::{hermite_min, wick_power_within, WickContext};

/// Identifies one reproducible random stream. The per-sample stream is a
/// pure function of `(master_seed, sample_index)`, independent of worker
/// count and evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub sample_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, sample_index: u64) -> Self {
        SeedSpec { master_seed, sample_index }
    }

    /// The stream cipher seeded from `(master_seed, sample_index)` with a
    /// fixed domain tag.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&self.sample_index.to_le_bytes());
        seed[16..24].copy_from_slice(b"fnlw-rng");
        ChaCha12Rng::from_seed(seed)
    }

    pub fn sample(&self, index: u64) -> SeedSpec {
        SeedSpec { master_seed: self.master_seed, sample_index: index }
    }
}

/// One standard normal pair by the Box-Muller map. Consumes exactly two
/// uniform draws, which keeps seeded streams stable.
pub(crate) fn normal_pair(rng: &mut impl Rng) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // in (0, 1]
    let u2: f64 = rng.gen::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let th = std::f64::consts::TAU * u2;
    (r * th.cos(), r * th.sin())
}

/// Complex Gaussian with unit second moment `E|g|^2 = 1`: independent real
/// and imaginary parts of variance 1/2.
fn complex_unit_gaussian(rng: &mut impl Rng) -> Complex64 {
    let (a, b) = normal_pair(rng);
    Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draw the Gaussian mode amplitudes `g(n)` for `|n| <= band` under the
/// constraint `g(-n) = conj(g(n))`: the zero mode is real with variance 1,
/// positive-half modes are complex with `E|g|^2 = 1`.
///
/// Stream layout: one Box-Muller pair for the zero modes of the two slots,
/// then per positive-half mode (in the canonical order of
/// [`half_modes`]) two complex draws, first slot `a` then slot `b`.
fn draw_gaussian_pair_fields(
    rng: &mut impl Rng,
    grid: GridSpec,
    band: u32,
) -> (FourierField, FourierField) {
    let mut a = FourierField::zeros(grid);
    let mut b = FourierField::zeros(grid);
    let (g0a, g0b) = normal_pair(rng);
    a.set_coeff([0, 0], Complex64::new(g0a, 0.0)).expect("origin fits");
    b.set_coeff([0, 0], Complex64::new(g0b, 0.0)).expect("origin fits");
    for n in half_modes(band) {
        let ga = complex_unit_gaussian(rng);
        let gb = complex_unit_gaussian(rng);
        let neg = [-n[0], -n[1]];
        a.set_coeff(n, ga).expect("mode fits");
        a.set_coeff(neg, ga.conj()).expect("mode fits");
        b.set_coeff(n, gb).expect("mode fits");
        b.set_coeff(neg, gb.conj()).expect("mode fits");
    }
    a.set_band(band);
    b.set_band(band);
    (a, b)
}

/// Draw `(u, v)` from the truncated free-field measure on the grid:
/// `u(n) = g0(n) / <n>^alpha` and `v(n) = g1(n)` for `|n| <= N`.
pub fn sample_mu_alpha(seed: &SeedSpec, grid: &GridSpec) -> PhaseState {
    let mut rng = seed.rng();
    sample_mu_alpha_with(&mut rng, grid)
}

pub(crate) fn sample_mu_alpha_with(rng: &mut impl Rng, grid: &GridSpec) -> PhaseState {
    let (g0, g1) = draw_gaussian_pair_fields(rng, *grid, grid.cutoff);
    let alpha = grid.alpha;
    let u = g0.apply_multiplier(|n| bracket(n).powf(-alpha));
    PhaseState { u, v: g1 }
}

/// Fresh velocity marginal: truncated white noise, one unit complex
/// Gaussian per mode.
pub(crate) fn sample_white_velocity(rng: &mut impl Rng, grid: &GridSpec) -> FourierField {
    let (v, _) = draw_gaussian_pair_fields(rng, *grid, grid.cutoff);
    v
}

/// White-noise pairing `W_f = sum f(n) conj(g(n))` of a real field against
/// a fresh noise draw on the field's own band. Mean zero, variance equal to
/// the squared `L^2` norm of `f`.
pub fn white_noise_pairing(f: &FourierField, seed: &SeedSpec) -> Result<f64> {
    if !f.is_hermitian(1e-10 * (1.0 + f.max_abs())) {
        return Err(Error::NonHermitian("white-noise pairing needs a real field".into()));
    }
    let mut rng = seed.rng();
    let (g0, _) = normal_pair(&mut rng);
    let mut total = f.coeff([0, 0]).re * g0;
    for n in half_modes(f.band()) {
        let g = complex_unit_gaussian(&mut rng);
        total += 2.0 * (f.coeff(n) * g.conj()).re;
    }
    Ok(total)
}

/// Renormalized potential `G_N(u)`: the mean of the Wick power of degree
/// `2m+2` of the band-limited position field (the zero mode of the
/// dealiased Hermite evaluation).
pub fn wick_potential(state: &PhaseState, ctx: &WickContext) -> Result<f64> {
    wick_potential_of_field(&state.u, ctx)
}

pub fn wick_potential_of_field(u: &FourierField, ctx: &WickContext) -> Result<f64> {
    let z = wick_power_within(u, ctx.wick_degree(), ctx, 0)?;
    Ok(z.coeff([0, 0]).re)
}

/// Unnormalized Gibbs density `exp(-G_N(u) / (2m+2))` against the free
/// measure. Strictly positive and bounded by
/// `exp(c(m) sigma^{m+1} / (2m+2))` with `c(m) = -hermite_min(2m+2)`.
pub fn gibbs_weight(state: &PhaseState, ctx: &WickContext) -> Result<f64> {
    Ok((-wick_potential(state, ctx)? / (2.0 * ctx.nonlin as f64 + 2.0)).exp())
}

/// Covariance kernel of the truncated free field:
/// `gamma_{alpha,N}(x) = sum_{|n| <= N} <n>^{-2 alpha} e^{i n.x}`.
/// Real, even, with `gamma(0) = sigma_{alpha,N}`.
pub fn gamma_kernel(alpha: f64, cutoff: u32, nonlin: u32) -> FourierField {
    let grid = GridSpec::for_band(cutoff, alpha, nonlin);
    let mut f = FourierField::zeros(grid);
    for (_, n) in grid.modes() {
        if crate::grid::norm_sq(n) <= (cutoff as i64) * (cutoff as i64) {
            f.set_coeff(n, Complex64::new(bracket(n).powf(-2.0 * alpha), 0.0))
                .expect("mode fits");
        }
    }
    f.set_band(cutoff);
    f
}

fn factorial(k: u32) -> f64 {
    (1..=k as u64).map(|v| v as f64).product()
}

/// Exact second-moment oracle `E[G_N G_M] = (2m+2)! Int gamma_min^{2m+2}`,
/// where the smaller truncation governs the cross term. The integral is the
/// dealiased zero mode of the pointwise kernel power.
pub fn exact_potential_covariance(alpha: f64, nonlin: u32, n_a: u32, n_b: u32) -> Result<f64> {
    let small = n_a.min(n_b);
    let degree = 2 * nonlin + 2;
    let kernel = gamma_kernel(alpha, small, nonlin);
    let mut mono = vec![0.0; degree as usize + 1];
    mono[degree as usize] = 1.0;
    let power = kernel.pointwise_polynomial_within(&mono, 0)?;
    Ok(factorial(degree) * power.coeff([0, 0]).re)
}

/// Exact `L^2` gap `|| G_b - G_a ||` between two truncations (`a <= b`).
pub fn exact_potential_gap(alpha: f64, nonlin: u32, n_a: u32, n_b: u32) -> Result<f64> {
    let (lo, hi) = (n_a.min(n_b), n_a.max(n_b));
    let var = exact_potential_covariance(alpha, nonlin, hi, hi)?
        - exact_potential_covariance(alpha, nonlin, lo, lo)?;
    Ok(var.max(0.0).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct CauchyRateRow {
    pub cutoff: u32,
    pub exact_gap: f64,
    pub mc_gap_sq: f64,
    pub mc_gap_sq_se: f64,
    pub exact_gap_sq: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CauchyRateStudy {
    pub alpha: f64,
    pub nonlin: u32,
    pub reference_cutoff: u32,
    pub rows: Vec<CauchyRateRow>,
    /// Log-log slope of the exact gap over the cutoffs below the reference.
    pub fitted_slope: f64,
    pub slope_se: f64,
    /// `1 - 2 alpha + m/(m+1)`, the proved decay exponent of the gap.
    pub theory_exponent: f64,
    /// Whether `alpha > 1 - 1/(2m+2)` (the admissible range).
    pub in_theory: bool,
    pub sample_count: usize,
    pub master_seed: u64,
}

/// Cauchy-rate study: exact gaps from the kernel oracle, Monte Carlo gaps
/// from paired sampling (the same draw feeds every truncation), and the
/// fitted log-log slope of the exact gap.
pub fn cauchy_rate_study(
    alpha: f64,
    nonlin: u32,
    cutoffs: &[u32],
    reference_cutoff: u32,
    samples: usize,
    master_seed: u64,
) -> Result<CauchyRateStudy> {
    let grid = GridSpec::with_min_grid(reference_cutoff, alpha, nonlin)?;
    let ref_ctx = WickContext::new(alpha, nonlin, reference_cutoff);
    let contexts: Vec<WickContext> =
        cutoffs.iter().map(|&n| WickContext::new(alpha, nonlin, n)).collect();

    // paired sampling: one draw per index, every truncation sees the same field
    let gaps_sq: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let state = sample_mu_alpha(&SeedSpec::new(master_seed, i as u64), &grid);
            let g_ref = wick_potential(&state, &ref_ctx).expect("grid admits the reference");
            contexts
                .iter()
                .map(|ctx| {
                    let projected = state.u.project(ctx.cutoff);
                    let g = wick_potential_of_field(&projected, ctx)
                        .expect("projection stays dealiased");
                    let d = g_ref - g;
                    d * d
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::new();
    for (j, &n) in cutoffs.iter().enumerate() {
        let series: Vec<f64> = gaps_sq.iter().map(|g| g[j]).collect();
        let (mean, var) = mean_var(&series);
        let exact_gap = exact_potential_gap(alpha, nonlin, n, reference_cutoff)?;
        rows.push(CauchyRateRow {
            cutoff: n,
            exact_gap,
            mc_gap_sq: mean,
            mc_gap_sq_se: (var / samples as f64).sqrt(),
            exact_gap_sq: exact_gap * exact_gap,
        });
    }

    let fit_rows: Vec<&CauchyRateRow> =
        rows.iter().filter(|r| r.cutoff < reference_cutoff && r.exact_gap > 0.0).collect();
    if fit_rows.len() < 2 {
        return Err(Error::DegenerateWindow(
            "need at least two cutoffs below the reference for the slope fit".into(),
        ));
    }
    let xs: Vec<f64> = fit_rows.iter().map(|r| (r.cutoff as f64).ln()).collect();
    let ys: Vec<f64> = fit_rows.iter().map(|r| r.exact_gap.ln()).collect();
    let (slope, _, se) = ols_slope(&xs, &ys);

    let m = nonlin as f64;
    Ok(CauchyRateStudy {
        alpha,
        nonlin,
        reference_cutoff,
        rows,
        fitted_slope: slope,
        slope_se: se,
        theory_exponent: 1.0 - 2.0 * alpha + m / (m + 1.0),
        in_theory: alpha > 1.0 - 1.0 / (2.0 * m + 2.0),
        sample_count: samples,
        master_seed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundReport {
    pub bound: f64,
    pub worst: f64,
    pub violations: usize,
    pub sample_count: usize,
    pub master_seed: u64,
}

/// Deterministic pointwise bound: `-G_N(u) <= c(m) sigma^{m+1}` for every
/// sample, with `c(m) = -hermite_min(2m+2)`. A single violating sample
/// fails the check.
pub fn potential_lower_bound_check(
    ctx: &WickContext,
    grid: &GridSpec,
    samples: usize,
    master_seed: u64,
) -> Result<LowerBoundReport> {
    let c_m = -hermite_min(ctx.wick_degree())?;
    let bound = c_m * ctx.sigma.powi(ctx.nonlin as i32 + 1);
    let neg_potentials: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let state = sample_mu_alpha(&SeedSpec::new(master_seed, i as u64), grid);
            -wick_potential(&state, ctx).expect("grid admits the Wick degree")
        })
        .collect();
    let worst = neg_potentials.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let violations = neg_potentials.iter().filter(|&&v| v > bound).count();
    Ok(LowerBoundReport { bound, worst, violations, sample_count: samples, master_seed })
}

#[derive(Debug, Clone, Serialize)]
pub struct TailRow {
    pub lambda: f64,
    pub hits: usize,
    /// Empirical survival probability; for under-resolved rows this is an
    /// upper bound, never a point estimate.
    pub probability: f64,
    pub censored: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailStudy {
    pub rows: Vec<TailRow>,
    /// Slope of `log P` against `lambda^{1/(m+1)}` over uncensored rows.
    pub stretched_slope: Option<f64>,
    pub sample_count: usize,
    pub master_seed: u64,
}

/// Empirical tail of `-G_N` over a lambda grid, with censoring below 10
/// hits, plus the stretched-exponential regression.
pub fn tail_study(
    ctx: &WickContext,
    grid: &GridSpec,
    samples: usize,
    lambda_grid: &[f64],
    master_seed: u64,
) -> Result<TailStudy> {
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let state = sample_mu_alpha(&SeedSpec::new(master_seed, i as u64), grid);
            -wick_potential(&state, ctx).expect("grid admits the Wick degree")
        })
        .collect();
    let mut rows = Vec::new();
    for &lambda in lambda_grid {
        let hits = values.iter().filter(|&&v| v > lambda).count();
        let censored = hits < 10;
        let probability = if censored {
            // report the resolution limit as an upper bound
            (hits.max(1) as f64 + 9.0) / samples as f64
        } else {
            hits as f64 / samples as f64
        };
        rows.push(TailRow { lambda, hits, probability, censored });
    }
    let exponent = 1.0 / (ctx.nonlin as f64 + 1.0);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| !r.censored && r.probability > 0.0 && r.probability < 1.0 && r.lambda > 0.0)
        .map(|r| (r.lambda.powf(exponent), r.probability.ln()))
        .collect();
    let stretched_slope = if pts.len() >= 2 {
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        Some(ols_slope(&xs, &ys).0)
    } else {
        None
    };
    Ok(TailStudy { rows, stretched_slope, sample_count: samples, master_seed })
}

#[derive(Debug, Clone, Serialize)]
pub struct ChaosRow {
    pub p: u32,
    pub lp_norm: f64,
    pub l2_norm: f64,
    pub ratio: f64,
    pub bound: f64,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChaosReport {
    pub chaos_order: u32,
    pub rows: Vec<ChaosRow>,
    pub pass: bool,
}

/// Hypercontractive moment check for a scalar in Wiener chaos of order at
/// most `k`: the empirical `L^p/L^2` ratio must sit below `(p-1)^{k/2}`
/// within three relative standard errors of slack.
pub fn wiener_chaos_check(values: &[f64], chaos_order: u32, p_list: &[u32]) -> ChaosReport {
    let n = values.len() as f64;
    let moment = |p: f64| -> (f64, f64) {
        let powered: Vec<f64> = values.iter().map(|v| v.abs().powf(p)).collect();
        let (mean, var) = mean_var(&powered);
        let norm = mean.powf(1.0 / p);
        // delta method: relative SE of mean^{1/p} is (1/p) relSE(mean)
        let rel_se = if mean > 0.0 { (var / n).sqrt() / mean / p } else { 0.0 };
        (norm, rel_se)
    };
    let (l2, rel2) = moment(2.0);
    let mut rows = Vec::new();
    for &p in p_list {
        let (lp, relp) = moment(p as f64);
        let ratio = lp / l2;
        let bound = ((p - 1) as f64).powf(chaos_order as f64 / 2.0);
        let slack = 3.0 * (relp * relp + rel2 * rel2).sqrt();
        let pass = ratio <= bound * (1.0 + slack);
        rows.push(ChaosRow { p, lp_norm: lp, l2_norm: l2, ratio, bound, slack, pass });
    }
    let pass = rows.iter().all(|r| r.pass);
    ChaosReport { chaos_order, rows, pass }
}

/// Ensemble of the renormalized potential over independent draws; fixed
/// reduction order.
pub fn potential_ensemble(
    ctx: &WickContext,
    grid: &GridSpec,
    samples: usize,
    master_seed: u64,
) -> Vec<f64> {
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let state = sample_mu_alpha(&SeedSpec::new(master_seed, i as u64), grid);
            wick_potential(&state, ctx).expect("grid admits the Wick degree")
        })
        .collect()
}

/// Mean report for the potential (Wick ordering kills the mean).
pub fn potential_mean_report(
    ctx: &WickContext,
    grid: &GridSpec,
    samples: usize,
    master_seed: u64,
) -> EnsembleReport {
    let values = potential_ensemble(ctx, grid, samples, master_seed);
    summarize("wick_potential", &values, master_seed)
}
