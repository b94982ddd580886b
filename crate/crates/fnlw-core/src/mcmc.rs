//! Gibbs sampling for the truncated measure and the Monte Carlo invariance
//! test of the truncated flow.
//!
//! The density relative to the free measure depends on the position only,
//! so the velocity marginal is refreshed exactly every sweep and only the
//! position moves by preconditioned Crank-Nicolson.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{evolve, wick_hamiltonian, EvolveOptions};
use crate::error::{Error, Result};
use crate::field::PhaseState;
use crate::grid::GridSpec;
use crate::measure::{
    sample_mu_alpha_with, sample_white_velocity, wick_potential_of_field, SeedSpec,
};
use crate::stats::{integrated_autocorr_time, mean_var};
use crate::wick::WickContext;

/// Position-only pCN chain state over the truncated Gibbs measure.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub state: PhaseState,
    /// Cached `-G_N(u) / (2m+2)`.
    pub log_weight: f64,
    /// pCN mixing parameter in (0, 1].
    pub step_size: f64,
    pub accept_count: u64,
    pub total_count: u64,
}

impl ChainState {
    pub fn acceptance_rate(&self) -> f64 {
        if self.total_count == 0 {
            0.0
        } else {
            self.accept_count as f64 / self.total_count as f64
        }
    }
}

fn log_weight(u: &crate::field::FourierField, ctx: &WickContext) -> Result<f64> {
    Ok(-wick_potential_of_field(u, ctx)? / (2.0 * ctx.nonlin as f64 + 2.0))
}

/// Start a chain from a free-field draw.
pub fn init_chain(
    rng: &mut impl Rng,
    grid: &GridSpec,
    ctx: &WickContext,
    step_size: f64,
) -> Result<ChainState> {
    if !(step_size > 0.0 && step_size <= 1.0) {
        return Err(Error::InvalidArgument("pCN step size must lie in (0, 1]".into()));
    }
    let state = sample_mu_alpha_with(rng, grid);
    let lw = log_weight(&state.u, ctx)?;
    Ok(ChainState { state, log_weight: lw, step_size, accept_count: 0, total_count: 0 })
}

/// One pCN sweep: propose `u' = sqrt(1 - b^2) u + b xi` with `xi` a fresh
/// free-field draw, accept with probability
/// `min(1, exp(logw(u') - logw(u)))`, and resample the velocity exactly
/// from its Gaussian marginal. Returns whether the proposal was accepted.
pub fn pcn_step(chain: &mut ChainState, ctx: &WickContext, rng: &mut impl Rng) -> Result<bool> {
    let beta = chain.step_size;
    let grid = *chain.state.grid();
    let proposal_noise = sample_mu_alpha_with(rng, &grid).u;
    let mut proposal = chain.state.u.scaled((1.0 - beta * beta).sqrt());
    proposal.axpy(beta, &proposal_noise)?;
    let lw_new = log_weight(&proposal, ctx)?;
    let accept = {
        let log_u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE).ln();
        log_u < lw_new - chain.log_weight
    };
    if accept {
        chain.state.u = proposal;
        chain.log_weight = lw_new;
        chain.accept_count += 1;
    }
    chain.total_count += 1;
    chain.state.v = sample_white_velocity(rng, &grid);
    Ok(accept)
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainDiagnostics {
    pub acceptance_rate: f64,
    /// Integrated autocorrelation time per recorded observable.
    pub autocorr_times: Vec<(String, f64)>,
    /// Z-scores of the first-half vs second-half means.
    pub split_half_z: Vec<(String, f64)>,
}

/// Diagnostics over recorded per-sweep observable series.
pub fn chain_diagnostics(
    series: &[(String, Vec<f64>)],
    acceptance_rate: f64,
) -> ChainDiagnostics {
    let mut autocorr_times = Vec::new();
    let mut split_half_z = Vec::new();
    for (name, values) in series {
        let tau = integrated_autocorr_time(values);
        autocorr_times.push((name.clone(), tau));
        let half = values.len() / 2;
        let (m1, v1) = mean_var(&values[..half]);
        let (m2, v2) = mean_var(&values[half..]);
        let tau_c = if tau.is_finite() { tau } else { values.len() as f64 };
        let se = ((v1 + v2) * tau_c / half.max(1) as f64).sqrt();
        let z = if se > 0.0 { (m2 - m1) / se } else { 0.0 };
        split_half_z.push((name.clone(), z));
    }
    ChainDiagnostics { acceptance_rate, autocorr_times, split_half_z }
}

#[derive(Debug, Clone, Copy)]
pub struct PcnOptions {
    pub step_size: f64,
    pub burn_in: usize,
    /// Sweeps between retained samples; `0` means thin by the measured
    /// autocorrelation time of the potential.
    pub thin: usize,
}

impl Default for PcnOptions {
    fn default() -> Self {
        PcnOptions { step_size: 0.2, burn_in: 1000, thin: 0 }
    }
}

/// Draw `count` approximately independent Gibbs samples by pCN with burn-in
/// and thinning. A post-burn-in pilot window sets the thinning from the
/// measured autocorrelation time; a frozen or visibly non-stationary pilot
/// aborts with the diagnostic in the error.
pub fn gibbs_ensemble(
    grid: &GridSpec,
    ctx: &WickContext,
    count: usize,
    options: &PcnOptions,
    seed: &SeedSpec,
) -> Result<(Vec<PhaseState>, ChainDiagnostics)> {
    let mut rng = seed.rng();
    let mut chain = init_chain(&mut rng, grid, ctx, options.step_size)?;
    for _ in 0..options.burn_in {
        pcn_step(&mut chain, ctx, &mut rng)?;
    }
    // stationarity pilot after burn-in
    chain.accept_count = 0;
    chain.total_count = 0;
    let pilot_len = (options.burn_in / 2).max(500);
    let mut pilot = Vec::with_capacity(pilot_len);
    for _ in 0..pilot_len {
        pcn_step(&mut chain, ctx, &mut rng)?;
        pilot.push(chain.log_weight);
    }
    let diagnostics =
        chain_diagnostics(&[("log_weight".into(), pilot)], chain.acceptance_rate());
    let split_z = diagnostics.split_half_z[0].1.abs();
    let tau = diagnostics.autocorr_times[0].1;
    if diagnostics.acceptance_rate < 0.01 || !tau.is_finite() || split_z > 5.0 {
        return Err(Error::InvalidArgument(format!(
            "non-stationary pCN chain: acceptance {:.4}, pilot autocorrelation time {tau:.1}, split-half z {split_z:.2}; \
             lower the step size or extend the burn-in",
            diagnostics.acceptance_rate
        )));
    }
    let thin = if options.thin > 0 {
        options.thin
    } else {
        (tau.ceil() as usize).clamp(1, 10_000)
    };
    let mut samples = Vec::with_capacity(count);
    while samples.len() < count {
        for _ in 0..thin {
            pcn_step(&mut chain, ctx, &mut rng)?;
        }
        samples.push(chain.state.clone());
    }
    Ok((samples, diagnostics))
}

/// Self-normalized importance ensemble targeting the truncated Gibbs
/// measure: draw from the free measure, weight by the Gibbs density.
#[derive(Debug, Clone)]
pub struct WeightedEnsemble {
    pub states: Vec<PhaseState>,
    pub log_weights: Vec<f64>,
    pub master_seed: u64,
}

impl WeightedEnsemble {
    fn weights(&self) -> Vec<f64> {
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.log_weights.iter().map(|lw| (lw - max).exp()).collect()
    }

    /// Effective sample size `(sum w)^2 / sum w^2`.
    pub fn ess(&self) -> f64 {
        let w = self.weights();
        let s: f64 = w.iter().sum();
        let s2: f64 = w.iter().map(|v| v * v).sum();
        if s2 > 0.0 {
            s * s / s2
        } else {
            0.0
        }
    }

    /// Degeneracy flag: effective sample size below 5% of the draw count
    /// means the weighted estimates are unreliable.
    pub fn degenerate(&self) -> bool {
        self.ess() < 0.05 * self.states.len() as f64
    }

    /// Weighted mean of an observable plus its self-normalized standard
    /// error.
    pub fn weighted_mean(&self, values: &[f64]) -> (f64, f64) {
        let w = self.weights();
        let sw: f64 = w.iter().sum();
        let mean = w.iter().zip(values).map(|(a, b)| a * b).sum::<f64>() / sw;
        let se_sq = w
            .iter()
            .zip(values)
            .map(|(a, b)| {
                let d = b - mean;
                a * a * d * d
            })
            .sum::<f64>()
            / (sw * sw);
        (mean, se_sq.sqrt())
    }
}

pub fn importance_ensemble(
    count: usize,
    seed: &SeedSpec,
    ctx: &WickContext,
    grid: &GridSpec,
) -> Result<WeightedEnsemble> {
    if count < 2 {
        return Err(Error::InvalidArgument("importance ensemble needs at least 2 draws".into()));
    }
    let m_norm = 2.0 * ctx.nonlin as f64 + 2.0;
    let pairs: Vec<(PhaseState, f64)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let state = sample_mu_alpha(&SeedSpec::new(seed.master_seed, i as u64), grid);
            let lw = -wick_potential_of_field(&state.u, ctx).expect("grid admits Wick degree")
                / m_norm;
            (state, lw)
        })
        .collect();
    let (states, log_weights) = pairs.into_iter().unzip();
    Ok(WeightedEnsemble { states, log_weights, master_seed: seed.master_seed })
}

use crate::measure::sample_mu_alpha;

/// Observables tracked by the invariance test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Observable {
    /// `|| P_k u ||_{L^2}^2`
    BandEnergy(u32),
    /// `|| v ||_{L^2}^2`
    VelocityEnergy,
    /// `G_N(u)`
    WickPotential,
    /// Truncated Wick Hamiltonian
    Hamiltonian,
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::BandEnergy(k) => format!("band_energy_{k}"),
            Observable::VelocityEnergy => "velocity_energy".into(),
            Observable::WickPotential => "wick_potential".into(),
            Observable::Hamiltonian => "hamiltonian".into(),
        }
    }

    pub fn eval(&self, state: &PhaseState, ctx: &WickContext) -> Result<f64> {
        Ok(match self {
            Observable::BandEnergy(k) => {
                let p = state.u.project(*k).sobolev_norm(0.0);
                p * p
            }
            Observable::VelocityEnergy => {
                let n = state.v.sobolev_norm(0.0);
                n * n
            }
            Observable::WickPotential => crate::measure::wick_potential(state, ctx)?,
            Observable::Hamiltonian => wick_hamiltonian(state, ctx)?,
        })
    }

    /// The default panel: low/mid/edge band energies, velocity energy, the
    /// potential, and the Hamiltonian.
    pub fn default_panel(cutoff: u32) -> Vec<Observable> {
        vec![
            Observable::BandEnergy(1),
            Observable::BandEnergy((cutoff / 2).max(1)),
            Observable::BandEnergy(cutoff),
            Observable::VelocityEnergy,
            Observable::WickPotential,
            Observable::Hamiltonian,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvarianceMode {
    /// Gibbs samples evolved by the full Wick dynamics.
    Gibbs,
    /// Free-measure samples evolved by the linear flow (control experiment:
    /// exact invariance, only Monte Carlo noise).
    GaussianLinear,
}

#[derive(Debug, Clone, Copy)]
pub struct InvarianceParams {
    pub sample_count: usize,
    pub t_final: f64,
    pub dt: f64,
    pub mode: InvarianceMode,
    pub pcn: PcnOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceRow {
    pub observable: String,
    pub mean_initial: f64,
    pub mean_final: f64,
    /// Standard error of the paired mean difference, autocorrelation
    /// corrected.
    pub std_error: f64,
    pub z_score: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub rows: Vec<InvarianceRow>,
    /// Rows recomputed at `dt/2` from the same initial ensemble.
    pub rows_refined: Vec<InvarianceRow>,
    pub sample_count: usize,
    pub dt: f64,
    pub acceptance_rate: f64,
    pub verdict: bool,
}

fn observable_rows(
    initials: &[PhaseState],
    finals: &[PhaseState],
    observables: &[Observable],
    ctx: &WickContext,
) -> Result<Vec<InvarianceRow>> {
    let mut rows = Vec::new();
    for obs in observables {
        let before: Vec<f64> =
            initials.iter().map(|s| obs.eval(s, ctx)).collect::<Result<_>>()?;
        let after: Vec<f64> = finals.iter().map(|s| obs.eval(s, ctx)).collect::<Result<_>>()?;
        let diffs: Vec<f64> = after.iter().zip(&before).map(|(a, b)| a - b).collect();
        let (mdiff, vdiff) = mean_var(&diffs);
        let tau = integrated_autocorr_time(&diffs);
        let tau = if tau.is_finite() { tau } else { 1.0 };
        let se = (vdiff * tau / diffs.len() as f64).sqrt();
        let (m0, _) = mean_var(&before);
        let (m1, _) = mean_var(&after);
        rows.push(InvarianceRow {
            observable: obs.name(),
            mean_initial: m0,
            mean_final: m1,
            std_error: se,
            z_score: if se > 0.0 { mdiff / se } else { 0.0 },
        });
    }
    Ok(rows)
}

/// Draw an ensemble from the invariant measure, push it through the
/// truncated flow at `dt` and `dt/2`, and compare observable means before
/// and after. Exact invariance holds in the `dt -> 0` limit, so the dt
/// refinement separates splitting bias from Monte Carlo noise.
pub fn invariance_test(
    ctx: &WickContext,
    grid: &GridSpec,
    params: &InvarianceParams,
    observables: &[Observable],
    seed: &SeedSpec,
) -> Result<InvarianceReport> {
    let (initials, acceptance_rate, kick_scale) = match params.mode {
        InvarianceMode::Gibbs => {
            let (samples, diag) =
                gibbs_ensemble(grid, ctx, params.sample_count, &params.pcn, seed)?;
            (samples, diag.acceptance_rate, 1.0)
        }
        InvarianceMode::GaussianLinear => {
            let samples: Vec<PhaseState> = (0..params.sample_count)
                .into_par_iter()
                .map(|i| sample_mu_alpha(&SeedSpec::new(seed.master_seed, i as u64), grid))
                .collect();
            (samples, 1.0, 0.0)
        }
    };

    let evolve_all = |dt: f64| -> Result<Vec<PhaseState>> {
        let steps = (params.t_final / dt).round() as usize;
        let opts = EvolveOptions { t_final: params.t_final, dt, store_every: steps.max(1), kick_scale };
        initials
            .par_iter()
            .map(|s| evolve(s, &opts, ctx).map(|t| t.final_state().clone()))
            .collect()
    };

    let finals = evolve_all(params.dt)?;
    let rows = observable_rows(&initials, &finals, observables, ctx)?;
    let finals_refined = evolve_all(0.5 * params.dt)?;
    let rows_refined = observable_rows(&initials, &finals_refined, observables, ctx)?;

    let verdict = rows.iter().all(|r| r.z_score.abs() <= 3.0)
        && rows_refined.iter().all(|r| r.z_score.abs() <= 3.0);
    Ok(InvarianceReport {
        rows,
        rows_refined,
        sample_count: params.sample_count,
        dt: params.dt,
        acceptance_rate,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wick::hermite;

    #[test]
    fn zero_step_size_keeps_position() {
        let ctx = WickContext::new(0.9, 1, 2);
        let grid = ctx.grid();
        let seed = SeedSpec::new(201, 0);
        let mut rng = seed.rng();
        // beta -> 0 limit: proposal equals the current state, always accepted
        let mut chain = init_chain(&mut rng, &grid, &ctx, 1e-12).unwrap();
        let u_before = chain.state.u.clone();
        for _ in 0..10 {
            pcn_step(&mut chain, &ctx, &mut rng).unwrap();
        }
        assert!(chain.acceptance_rate() > 0.99);
        assert!(chain.state.u.sub(&u_before).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn trivial_weight_preserves_prior_variances() {
        // with the Wick weight disabled every proposal is accepted and the
        // chain marginals stay at the free-field mode variances
        let grid = GridSpec::with_min_grid(2, 0.9, 1).unwrap();
        let seed = SeedSpec::new(203, 0);
        let mut rng = seed.rng();
        let mut state = sample_mu_alpha_with(&mut rng, &grid);
        let beta: f64 = 0.4;
        let mut sq = Vec::new();
        for _ in 0..6000 {
            let noise = sample_mu_alpha_with(&mut rng, &grid).u;
            let mut prop = state.u.scaled((1.0 - beta * beta).sqrt());
            prop.axpy(beta, &noise).unwrap();
            state.u = prop;
            sq.push(state.u.coeff([1, 0]).norm_sqr());
        }
        let (mean, var) = mean_var(&sq);
        let expect = crate::grid::bracket([1, 0]).powf(-1.8);
        let tau = integrated_autocorr_time(&sq);
        let se = (var * tau / sq.len() as f64).sqrt();
        assert!((mean - expect).abs() < 4.0 * se, "{mean} vs {expect} (se {se})");
    }

    #[test]
    fn acceptance_rate_positive_at_small_cutoff() {
        let ctx = WickContext::new(0.9, 1, 4);
        let grid = ctx.grid();
        let seed = SeedSpec::new(207, 0);
        let mut rng = seed.rng();
        let mut chain = init_chain(&mut rng, &grid, &ctx, 0.2).unwrap();
        for _ in 0..400 {
            pcn_step(&mut chain, &ctx, &mut rng).unwrap();
        }
        assert!(chain.acceptance_rate() > 0.05, "rate {}", chain.acceptance_rate());
        // cached log-weight stays consistent with the state
        let lw = log_weight(&chain.state.u, &ctx).unwrap();
        assert!((lw - chain.log_weight).abs() < 1e-10 * (1.0 + lw.abs()));
    }

    #[test]
    fn one_mode_chain_matches_analytic_density() {
        // N = 0: stationary density prop to exp(-u^2/2 - H_4(u; 1)/4)
        let ctx = WickContext::new(0.9, 1, 0);
        let grid = ctx.grid();
        let seed = SeedSpec::new(211, 0);
        let mut rng = seed.rng();
        let mut chain = init_chain(&mut rng, &grid, &ctx, 0.5).unwrap();
        for _ in 0..500 {
            pcn_step(&mut chain, &ctx, &mut rng).unwrap();
        }
        let mut draws = Vec::new();
        for _ in 0..20_000 {
            for _ in 0..5 {
                pcn_step(&mut chain, &ctx, &mut rng).unwrap();
            }
            draws.push(chain.state.u.coeff([0, 0]).re);
        }
        // chi-square against the numerically normalized density
        let density = |x: f64| (-0.5 * x * x - hermite(4, x, 1.0) / 4.0).exp();
        let lo = -3.0;
        let hi = 3.0;
        let bins = 16;
        let step = (hi - lo) / bins as f64;
        let quad = |a: f64, b: f64| {
            let steps = 400;
            let h = (b - a) / steps as f64;
            (0..steps)
                .map(|i| {
                    let x0 = a + i as f64 * h;
                    (density(x0) + 4.0 * density(x0 + 0.5 * h) + density(x0 + h)) * h / 6.0
                })
                .sum::<f64>()
        };
        let total = quad(-8.0, 8.0);
        let mut expected = vec![0.0; bins + 2];
        expected[0] = quad(-8.0, lo) / total;
        expected[bins + 1] = quad(hi, 8.0) / total;
        for b in 0..bins {
            expected[b + 1] = quad(lo + b as f64 * step, lo + (b + 1) as f64 * step) / total;
        }
        let mut observed = vec![0u64; bins + 2];
        for &x in &draws {
            let idx = if x < lo {
                0
            } else if x >= hi {
                bins + 1
            } else {
                1 + ((x - lo) / step) as usize
            };
            observed[idx.min(bins + 1)] += 1;
        }
        let n = draws.len() as f64;
        let expected_counts: Vec<f64> = expected.iter().map(|p| p * n).collect();
        let stat = crate::stats::chi_square_statistic(&observed, &expected_counts);
        let crit = crate::stats::chi_square_critical(bins + 1, 0.99);
        assert!(stat < crit, "chi-square {stat} above the 1% critical value {crit}");
    }

    #[test]
    fn importance_weights_uniform_when_density_trivial() {
        // at sigma with G = const the weights are equal and ESS = K
        let ctx = WickContext::new(0.9, 1, 2);
        let grid = ctx.grid();
        let ens = importance_ensemble(200, &SeedSpec::new(213, 0), &ctx, &grid).unwrap();
        let uniform = WeightedEnsemble {
            states: ens.states.clone(),
            log_weights: vec![0.0; 200],
            master_seed: 0,
        };
        assert!((uniform.ess() - 200.0).abs() < 1e-9);
        assert!(ens.ess() <= 200.0);
    }

    #[test]
    fn gaussian_linear_invariance_control() {
        let ctx = WickContext::new(0.9, 1, 3);
        let grid = ctx.grid();
        let params = InvarianceParams {
            sample_count: 400,
            t_final: 0.5,
            dt: 0.01,
            mode: InvarianceMode::GaussianLinear,
            pcn: PcnOptions::default(),
        };
        let obs = Observable::default_panel(grid.cutoff);
        let report =
            invariance_test(&ctx, &grid, &params, &obs, &SeedSpec::new(217, 0)).unwrap();
        for row in report.rows.iter().chain(&report.rows_refined) {
            assert!(
                row.z_score.abs() <= 3.0,
                "{}: z = {}",
                row.observable,
                row.z_score
            );
        }
        assert!(report.verdict);
    }
}
