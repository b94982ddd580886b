//! Linear propagator, Duhamel integral, and the measure-preserving Strang
//! evolution of the frequency-truncated Wick dynamics.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{FourierField, PhaseState};
use crate::grid::bracket;
use crate::wick::{wick_power_within, WickContext};

/// Exact rotation of the linear flow `u_tt + (1 - Lap)^alpha u = 0`:
/// per mode, with `th = <n>^alpha`,
/// `u(t) = cos(t th) u0 + sin(t th) v0 / th` and
/// `v(t) = -th sin(t th) u0 + cos(t th) v0`.
/// Norm-preserving in the quadratic energy metric.
pub fn linear_propagate(state: &PhaseState, t: f64) -> PhaseState {
    let mut out = state.clone();
    linear_propagate_in_place(&mut out, t, state.grid().alpha);
    out
}

pub(crate) fn linear_propagate_in_place(state: &mut PhaseState, t: f64, alpha: f64) {
    let grid = *state.u.grid();
    let u = state.u.coeffs_mut();
    let v = state.v.coeffs_mut();
    for (idx, n) in grid.modes() {
        let theta = bracket(n).powf(alpha);
        let (s, c) = (t * theta).sin_cos();
        let u0 = u[idx];
        let v0 = v[idx];
        u[idx] = c * u0 + (s / theta) * v0;
        v[idx] = -theta * s * u0 + c * v0;
    }
    let band = state.u.band().max(state.v.band());
    state.u.set_band(band);
    state.v.set_band(band);
}

/// Quadratic part of the energy: `1/2 ||u||_{H^alpha}^2 + 1/2 ||v||_{L^2}^2`.
pub fn quadratic_energy(state: &PhaseState, alpha: f64) -> f64 {
    let hu = state.u.sobolev_norm(alpha);
    let hv = state.v.sobolev_norm(0.0);
    0.5 * hu * hu + 0.5 * hv * hv
}

/// Truncated Wick Hamiltonian:
/// `1/2 ||u||_{H^alpha}^2 + 1/2 ||v||_{L^2}^2 + G_N(u) / (2m+2)`.
pub fn wick_hamiltonian(state: &PhaseState, ctx: &WickContext) -> Result<f64> {
    let potential = crate::measure::wick_potential(state, ctx)?;
    Ok(quadratic_energy(state, ctx.alpha) + potential / (2.0 * ctx.nonlin as f64 + 2.0))
}

/// The projected nonlinear force `P_N(:u^{2m+1}:)`, dealiased on the
/// state's own grid.
pub(crate) fn wick_force(u: &FourierField, ctx: &WickContext) -> Result<FourierField> {
    wick_power_within(u, ctx.kick_degree(), ctx, ctx.cutoff)
}

fn kick(state: &mut PhaseState, dt: f64, ctx: &WickContext, scale: f64) -> Result<()> {
    if scale == 0.0 {
        return Ok(());
    }
    let force = wick_force(&state.u, ctx)?;
    state.v.axpy(-dt * scale, &force)?;
    Ok(())
}

/// One Strang step: half kick, exact linear rotation, half kick. Each
/// sub-flow is Hamiltonian, so the composition preserves phase-space volume;
/// the symmetric arrangement makes it time-reversible and second-order.
pub fn strang_step(state: &PhaseState, dt: f64, ctx: &WickContext) -> Result<PhaseState> {
    strang_step_scaled(state, dt, ctx, 1.0)
}

/// Strang step with the nonlinear kick multiplied by `kick_scale`
/// (`0` reproduces the linear rotation exactly).
pub fn strang_step_scaled(
    state: &PhaseState,
    dt: f64,
    ctx: &WickContext,
    kick_scale: f64,
) -> Result<PhaseState> {
    let mut out = state.clone();
    kick(&mut out, 0.5 * dt, ctx, kick_scale)?;
    linear_propagate_in_place(&mut out, dt, ctx.alpha);
    kick(&mut out, 0.5 * dt, ctx, kick_scale)?;
    Ok(out)
}

/// Time-stamped trajectory with the conserved-quantity log.
#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    pub hamiltonian_log: Vec<f64>,
}

impl TrajectorySample {
    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.states.len() || self.times.len() != self.hamiltonian_log.len()
        {
            return Err(Error::DimensionMismatch("trajectory length mismatch".into()));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("times must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn final_state(&self) -> &PhaseState {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    /// Largest relative excursion of the Hamiltonian log from its initial
    /// value.
    pub fn hamiltonian_drift(&self) -> f64 {
        let h0 = self.hamiltonian_log[0];
        let scale = h0.abs().max(1e-300);
        self.hamiltonian_log
            .iter()
            .map(|h| (h - h0).abs() / scale)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub t_final: f64,
    pub dt: f64,
    /// Store every this many steps (the initial state is always stored).
    pub store_every: usize,
    /// Multiplier on the nonlinear kick; `1` is the Wick dynamics, `0` the
    /// linear flow.
    pub kick_scale: f64,
}

impl EvolveOptions {
    pub fn new(t_final: f64, dt: f64, store_every: usize) -> Self {
        EvolveOptions { t_final, dt, store_every, kick_scale: 1.0 }
    }
}

/// Evolve by repeated Strang steps. Between stored states the trailing and
/// leading half kicks are merged into full kicks, which is the same map
/// evaluated with half the nonlinear work.
pub fn evolve(state: &PhaseState, opts: &EvolveOptions, ctx: &WickContext) -> Result<TrajectorySample> {
    if opts.t_final < 0.0 || opts.dt <= 0.0 {
        return Err(Error::InvalidArgument("need t_final >= 0 and dt > 0".into()));
    }
    let n_steps = (opts.t_final / opts.dt).round() as usize;
    if (n_steps as f64 * opts.dt - opts.t_final).abs() > 1e-9 * opts.t_final.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "dt = {} does not divide t_final = {}",
            opts.dt, opts.t_final
        )));
    }
    let store_every = opts.store_every.max(1);

    let mut times = vec![0.0];
    let mut states = vec![state.clone()];
    let mut hamiltonians = vec![wick_hamiltonian(state, ctx)?];

    let mut cur = state.clone();
    let mut step = 0usize;
    while step < n_steps {
        let segment = store_every.min(n_steps - step);
        kick(&mut cur, 0.5 * opts.dt, ctx, opts.kick_scale)?;
        for inner in 0..segment {
            linear_propagate_in_place(&mut cur, opts.dt, ctx.alpha);
            if inner + 1 < segment {
                kick(&mut cur, opts.dt, ctx, opts.kick_scale)?;
            }
        }
        kick(&mut cur, 0.5 * opts.dt, ctx, opts.kick_scale)?;
        step += segment;
        times.push(step as f64 * opts.dt);
        states.push(cur.clone());
        hamiltonians.push(wick_hamiltonian(&cur, ctx)?);
    }

    let traj = TrajectorySample { times, states, hamiltonian_log: hamiltonians };
    traj.validate()?;
    Ok(traj)
}

/// Incremental composite-trapezoid evaluation of the Duhamel integral
/// `D(F)(t) = Int_0^t sin((t - s) <Del>^alpha) <Del>^{-alpha} F(s) ds`
/// over a uniform node grid, with the oscillatory kernel evaluated exactly
/// at the nodes. Advancing costs O(modes) per node.
pub(crate) struct DuhamelAccumulator {
    grid: crate::grid::GridSpec,
    dt: f64,
    theta: Vec<f64>,
    rot_cos: Vec<f64>,
    rot_sin: Vec<f64>,
    /// interior sine/cosine-weighted sums
    sin_acc: Vec<Complex64>,
    cos_acc: Vec<Complex64>,
    first: Option<Vec<Complex64>>,
    prev: Vec<Complex64>,
    node: usize,
    band: u32,
}

impl DuhamelAccumulator {
    pub fn new(grid: crate::grid::GridSpec, dt: f64, alpha: f64) -> Self {
        let len = grid.lattice_len();
        let mut theta = vec![0.0; len];
        let mut rot_cos = vec![0.0; len];
        let mut rot_sin = vec![0.0; len];
        for (idx, n) in grid.modes() {
            let th = bracket(n).powf(alpha);
            theta[idx] = th;
            let (s, c) = (dt * th).sin_cos();
            rot_cos[idx] = c;
            rot_sin[idx] = s;
        }
        DuhamelAccumulator {
            grid,
            dt,
            theta,
            rot_cos,
            rot_sin,
            sin_acc: vec![Complex64::default(); len],
            cos_acc: vec![Complex64::default(); len],
            first: None,
            prev: vec![Complex64::default(); len],
            node: 0,
            band: 0,
        }
    }

    /// Push the forcing sample at node `self.node` (times `0, dt, 2dt, ...`
    /// in order).
    pub fn push(&mut self, sample: &FourierField) -> Result<()> {
        if sample.grid().grid_size != self.grid.grid_size {
            return Err(Error::DimensionMismatch("forcing grid changed mid-stream".into()));
        }
        self.band = self.band.max(sample.band());
        let coeffs = sample.coeffs();
        if self.first.is_none() {
            // the first node is the trapezoid endpoint, handled in value();
            // it must never enter the interior sums, so prev stays zero here
            self.first = Some(coeffs.to_vec());
            self.node = 1;
            return Ok(());
        }
        for idx in 0..coeffs.len() {
            let (c, s) = (self.rot_cos[idx], self.rot_sin[idx]);
            let p = self.sin_acc[idx];
            let q = self.cos_acc[idx];
            let prev = self.prev[idx];
            self.sin_acc[idx] = p * c + q * s + s * prev;
            self.cos_acc[idx] = q * c - p * s + c * prev;
        }
        self.prev.copy_from_slice(coeffs);
        self.node += 1;
        Ok(())
    }

    /// Duhamel value at the latest node time `(nodes - 1) dt`. The endpoint
    /// kernel vanishes, so the trapezoid needs only the interior sums and
    /// the explicit first-node term.
    pub fn value(&self) -> FourierField {
        let mut out = vec![Complex64::default(); self.grid.lattice_len()];
        if let Some(first) = &self.first {
            let t = (self.node.saturating_sub(1)) as f64 * self.dt;
            for idx in 0..out.len() {
                let th = self.theta[idx];
                let endpoint = 0.5 * (t * th).sin() * first[idx];
                out[idx] = self.dt * (self.sin_acc[idx] + endpoint) / th;
            }
        }
        let mut f = FourierField::from_raw(self.grid, 0, out);
        f.set_band(self.band);
        f
    }
}

/// Duhamel integral of a forcing sampled on the uniform quadrature grid
/// `t_q = q dt_quad`; `t` must land on a sampled node. Composite trapezoid
/// with the exact per-mode sine kernel, second-order in `dt_quad`.
pub fn duhamel(forcing: &[FourierField], dt_quad: f64, t: f64) -> Result<FourierField> {
    if dt_quad <= 0.0 {
        return Err(Error::InvalidArgument("dt_quad must be positive".into()));
    }
    let first = forcing
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty forcing sequence".into()))?;
    let max_t = (forcing.len() - 1) as f64 * dt_quad;
    let pos = t / dt_quad;
    let node = pos.round() as i64;
    if t < 0.0 || t > max_t + 1e-9 * max_t.max(1.0) || (pos - node as f64).abs() > 1e-7 {
        return Err(Error::TimeWindow { t, max: max_t });
    }
    let mut acc = DuhamelAccumulator::new(*first.grid(), dt_quad, first.grid().alpha);
    for sample in forcing.iter().take(node as usize + 1) {
        acc.push(sample)?;
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::measure::{sample_mu_alpha, SeedSpec};

    fn ctx_and_grid(cutoff: u32, alpha: f64) -> (WickContext, GridSpec) {
        let ctx = WickContext::new(alpha, 1, cutoff);
        (ctx, ctx.grid())
    }

    #[test]
    fn zero_state_stays_zero() {
        let (_, grid) = ctx_and_grid(2, 0.8);
        let zero = PhaseState::zeros(grid);
        let moved = linear_propagate(&zero, 1.7);
        assert_eq!(moved.u.max_abs(), 0.0);
        assert_eq!(moved.v.max_abs(), 0.0);
    }

    #[test]
    fn zero_mode_is_a_unit_oscillator() {
        // phi0 = c, phi1 = 0: u(t) = c cos t since <0> = 1
        let (_, grid) = ctx_and_grid(2, 0.8);
        let mut state = PhaseState::zeros(grid);
        state.u.set_coeff([0, 0], Complex64::new(0.7, 0.0)).unwrap();
        for &t in &[0.3, 1.0, 2.5] {
            let moved = linear_propagate(&state, t);
            assert!((moved.u.coeff([0, 0]).re - 0.7 * t.cos()).abs() < 1e-13);
            assert!((moved.v.coeff([0, 0]).re + 0.7 * t.sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn single_mode_rotation_alpha_half() {
        // alpha = 1/2, mode (1,0): theta = 2^{1/4}
        let grid = GridSpec::with_min_grid(2, 0.5, 1).unwrap();
        let mut state = PhaseState::zeros(grid);
        state.u.set_coeff([1, 0], Complex64::new(1.0, 0.0)).unwrap();
        state.u.set_coeff([-1, 0], Complex64::new(1.0, 0.0)).unwrap();
        let theta = 2f64.powf(0.25);
        assert!((theta - 1.18920712).abs() < 1e-7);
        let moved = linear_propagate(&state, 1.0);
        assert!((moved.u.coeff([1, 0]).re - theta.cos()).abs() < 1e-13);
    }

    #[test]
    fn linear_flow_preserves_quadratic_energy() {
        let (_, grid) = ctx_and_grid(4, 0.9);
        let state = sample_mu_alpha(&SeedSpec::new(2, 0), &grid);
        let e0 = quadratic_energy(&state, grid.alpha);
        for &t in &[0.1, 1.0, 7.3, 50.0] {
            let moved = linear_propagate(&state, t);
            let e = quadratic_energy(&moved, grid.alpha);
            assert!((e - e0).abs() <= 1e-12 * e0, "t={t}: {e} vs {e0}");
        }
    }

    #[test]
    fn strang_degenerates_to_linear_without_kick() {
        let (ctx, grid) = ctx_and_grid(3, 0.9);
        let state = sample_mu_alpha(&SeedSpec::new(3, 1), &grid);
        let a = strang_step_scaled(&state, 0.01, &ctx, 0.0).unwrap();
        let b = linear_propagate(&state, 0.01);
        assert!(a.u.sub(&b.u).unwrap().max_abs() < 1e-14);
        assert!(a.v.sub(&b.v).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn strang_step_is_reversible() {
        let (ctx, grid) = ctx_and_grid(4, 0.9);
        let state = sample_mu_alpha(&SeedSpec::new(5, 2), &grid);
        for &dt in &[1e-2, 1e-3] {
            let forward = strang_step(&state, dt, &ctx).unwrap();
            let back = strang_step(&forward, -dt, &ctx).unwrap();
            let scale = state.u.sobolev_norm(0.0) + state.v.sobolev_norm(0.0);
            let err = back.u.sub(&state.u).unwrap().sobolev_norm(0.0)
                + back.v.sub(&state.v).unwrap().sobolev_norm(0.0);
            assert!(err < 1e-11 * scale, "dt={dt}: relative error {}", err / scale);
        }
    }

    #[test]
    fn constant_zero_data_stays_zero_for_cubic() {
        // H_3(0; sigma) = 0, so zero data is a fixed point when m = 1
        let (ctx, grid) = ctx_and_grid(2, 0.8);
        let zero = PhaseState::zeros(grid);
        let traj = evolve(&zero, &EvolveOptions::new(0.5, 0.01, 10), &ctx).unwrap();
        assert!(traj.final_state().u.max_abs() < 1e-14);
        assert!(traj.final_state().v.max_abs() < 1e-14);
    }

    #[test]
    fn evolve_zero_horizon_returns_input() {
        let (ctx, grid) = ctx_and_grid(2, 0.8);
        let state = sample_mu_alpha(&SeedSpec::new(7, 0), &grid);
        let traj = evolve(&state, &EvolveOptions::new(0.0, 0.01, 1), &ctx).unwrap();
        assert_eq!(traj.states.len(), 1);
        assert_eq!(traj.states[0], state);
    }

    #[test]
    fn merged_kicks_match_plain_stepping() {
        let (ctx, grid) = ctx_and_grid(3, 0.85);
        let state = sample_mu_alpha(&SeedSpec::new(11, 4), &grid);
        let traj = evolve(&state, &EvolveOptions::new(0.05, 0.01, 5), &ctx).unwrap();
        let mut manual = state.clone();
        for _ in 0..5 {
            manual = strang_step(&manual, 0.01, &ctx).unwrap();
        }
        let diff = traj.final_state().u.sub(&manual.u).unwrap().max_abs();
        assert!(diff < 1e-12, "merged vs plain differ by {diff}");
    }

    #[test]
    fn wick_hamiltonian_constant_velocity_case() {
        // u = 0, v = c: H = c^2/2 + 3 sigma^2 / 4 for m = 1
        let (ctx, grid) = ctx_and_grid(2, 0.8);
        let mut state = PhaseState::zeros(grid);
        state.v.set_coeff([0, 0], Complex64::new(1.4, 0.0)).unwrap();
        let h = wick_hamiltonian(&state, &ctx).unwrap();
        let expect = 1.4 * 1.4 / 2.0 + 0.75 * ctx.sigma * ctx.sigma;
        assert!((h - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn duhamel_constant_forcing_zero_mode() {
        // zero mode with F = 1: x'' + x = 1 from rest gives x(t) = 1 - cos t
        let grid = GridSpec::with_min_grid(1, 0.9, 1).unwrap();
        let dt: f64 = 1e-3;
        let t = 1.0;
        let nodes = (t / dt).round() as usize + 1;
        let forcing: Vec<FourierField> =
            (0..nodes).map(|_| FourierField::constant(grid, 1.0)).collect();
        let out = duhamel(&forcing, dt, t).unwrap();
        let expect = 1.0 - t.cos();
        assert!((out.coeff([0, 0]).re - expect).abs() < 1e-6);
        // F = 0 gives 0
        let zeros: Vec<FourierField> = (0..3).map(|_| FourierField::zeros(grid)).collect();
        assert_eq!(duhamel(&zeros, dt, 2.0 * dt).unwrap().max_abs(), 0.0);
        // outside the window errors
        assert!(duhamel(&forcing, dt, 2.0).is_err());
    }

    #[test]
    fn duhamel_oscillatory_forcing_second_order() {
        // single mode (1,0), alpha = 0.9, forcing cos(w s): closed form by
        // variation of constants, theta != w (non-resonant)
        let grid = GridSpec::with_min_grid(1, 0.9, 1).unwrap();
        let theta = bracket([1, 0]).powf(0.9);
        let w = 0.4;
        let t = 0.8;
        let closed = |t: f64| {
            // Int_0^t sin((t-s) theta)/theta cos(w s) ds
            (t * w).cos().mul_add(-1.0, (theta * t).cos()) / (w * w - theta * theta)
        };
        let mut errs = Vec::new();
        for &dt in &[4e-3f64, 2e-3] {
            let nodes = (t / dt).round() as usize + 1;
            let forcing: Vec<FourierField> = (0..nodes)
                .map(|q| {
                    let mut f = FourierField::zeros(grid);
                    let s = q as f64 * dt;
                    f.set_coeff([1, 0], Complex64::new((w * s).cos(), 0.0)).unwrap();
                    f.set_coeff([-1, 0], Complex64::new((w * s).cos(), 0.0)).unwrap();
                    f
                })
                .collect();
            let out = duhamel(&forcing, dt, t).unwrap();
            errs.push((out.coeff([1, 0]).re - closed(t)).abs());
        }
        assert!(errs[0] < 1e-4);
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.7, "observed quadrature order {order}");
    }

    #[test]
    fn hamiltonian_drift_is_second_order() {
        // the energy error oscillates at O(dt^2): small in absolute terms
        // and shrinking fourfold under dt halving
        let (ctx, grid) = ctx_and_grid(4, 0.9);
        let state = sample_mu_alpha(&SeedSpec::new(13, 6), &grid);
        let drift = |dt: f64| {
            evolve(&state, &EvolveOptions::new(0.2, dt, (0.05 / dt) as usize), &ctx)
                .unwrap()
                .hamiltonian_drift()
        };
        let d1 = drift(2e-3);
        let d2 = drift(1e-3);
        assert!(d2 < 5e-5, "drift {d2} at dt = 1e-3");
        let ratio = d1 / d2;
        assert!((3.0..5.0).contains(&ratio), "drift ratio {ratio} not ~4");
    }
}
