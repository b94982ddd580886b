//! Stochastic objects of the first and second order expansions: Wick powers
//! of the random linear evolution, their Duhamel images, and pointwise
//! products. Objects are stored on their true (wider) frequency bands.

use crate::dynamics::{linear_propagate, DuhamelAccumulator};
use crate::error::{Error, Result};
use crate::field::{FourierField, PhaseState};
use crate::grid::GridSpec;
use crate::measure::{sample_mu_alpha, SeedSpec};
use crate::wick::{wick_power, WickContext};

/// What a stored object is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKind {
    /// `:z^l:`
    WickZPower { degree: u32 },
    /// `D(:z^k:)` (the positive Duhamel image)
    DuhamelOfWick { degree: u32 },
    /// Second-order correction `z2 = -D(:z^{2m+1}:)`
    SecondOrder,
    /// `:z^{k1}: (D(:z^k:))^{k2}`
    Product { k1: u32, k: u32, k2: u32 },
}

/// Field snapshots of one stochastic object along a time grid, for one
/// sample of the underlying Gaussian data.
#[derive(Debug, Clone)]
pub struct StochasticObject {
    pub kind: ObjectKind,
    pub times: Vec<f64>,
    pub snapshots: Vec<FourierField>,
    pub sample_index: u64,
}

/// The random linear evolution `z_N(t)`: free-field data propagated by the
/// exact rotation; its per-mode second moment is `<n>^{-2 alpha}` at every
/// time.
pub fn linear_field(seed: &SeedSpec, grid: &GridSpec, t: f64) -> FourierField {
    let state = sample_mu_alpha(seed, grid);
    linear_propagate(&state, t).u
}

pub(crate) fn linear_field_from_state(state: &PhaseState, t: f64) -> FourierField {
    linear_propagate(state, t).u
}

/// `:z^l:(t)` snapshots, dealiased on the full band `l N`.
pub fn wick_z_power(
    seed: &SeedSpec,
    degree: u32,
    times: &[f64],
    ctx: &WickContext,
) -> Result<StochasticObject> {
    if degree < 1 || degree > ctx.kick_degree() {
        return Err(Error::InvalidArgument(format!(
            "Wick power degree must lie in 1..=2m+1, got {degree}"
        )));
    }
    let grid = ctx.grid();
    let data = sample_mu_alpha(seed, &grid);
    let snapshots = times
        .iter()
        .map(|&t| wick_power(&linear_field_from_state(&data, t), degree, ctx))
        .collect::<Result<Vec<_>>>()?;
    Ok(StochasticObject {
        kind: ObjectKind::WickZPower { degree },
        times: times.to_vec(),
        snapshots,
        sample_index: seed.sample_index,
    })
}

fn check_node_times(times: &[f64], dt_quad: f64) -> Result<Vec<usize>> {
    if dt_quad <= 0.0 {
        return Err(Error::InvalidArgument("dt_quad must be positive".into()));
    }
    times
        .iter()
        .map(|&t| {
            let pos = t / dt_quad;
            let node = pos.round();
            if t < 0.0 || (pos - node).abs() > 1e-7 {
                Err(Error::TimeWindow { t, max: f64::INFINITY })
            } else {
                Ok(node as usize)
            }
        })
        .collect()
}

/// Shared engine: walk the quadrature grid once, pushing `:z^degree:(t_q)`
/// into a Duhamel accumulator, and capture the requested node values.
/// `band_limit` projects the forcing before integration (the truncated
/// equation applies `P_N` there).
fn duhamel_walk(
    data: &PhaseState,
    degree: u32,
    times: &[f64],
    dt_quad: f64,
    ctx: &WickContext,
    band_limit: Option<u32>,
) -> Result<Vec<FourierField>> {
    let nodes = check_node_times(times, dt_quad)?;
    let last = nodes.iter().copied().max().unwrap_or(0);
    let mut acc: Option<DuhamelAccumulator> = None;
    let mut captured: Vec<Option<FourierField>> = vec![None; times.len()];
    for q in 0..=last {
        let t_q = q as f64 * dt_quad;
        let mut forcing = wick_power(&linear_field_from_state(data, t_q), degree, ctx)?;
        if let Some(band) = band_limit {
            forcing = forcing.project(band);
        }
        let acc = acc.get_or_insert_with(|| {
            DuhamelAccumulator::new(*forcing.grid(), dt_quad, ctx.alpha)
        });
        acc.push(&forcing)?;
        for (slot, &node) in nodes.iter().enumerate() {
            if node == q {
                captured[slot] = Some(acc.value());
            }
        }
    }
    Ok(captured.into_iter().map(|c| c.expect("every node visited")).collect())
}

/// `D(:z^k:)` snapshots (positive Duhamel image), full band.
pub fn duhamel_of_wick(
    seed: &SeedSpec,
    degree: u32,
    times: &[f64],
    dt_quad: f64,
    ctx: &WickContext,
) -> Result<StochasticObject> {
    let grid = ctx.grid();
    let data = sample_mu_alpha(seed, &grid);
    let snapshots = duhamel_walk(&data, degree, times, dt_quad, ctx, None)?;
    Ok(StochasticObject {
        kind: ObjectKind::DuhamelOfWick { degree },
        times: times.to_vec(),
        snapshots,
        sample_index: seed.sample_index,
    })
}

/// Second-order correction `z2(t)`: the zero-data solution of
/// `z2_tt + (1 - Lap)^alpha z2 + :z^{2m+1}: = 0`, i.e. `-D(:z^{2m+1}:)`.
pub fn second_order_field(
    seed: &SeedSpec,
    times: &[f64],
    dt_quad: f64,
    ctx: &WickContext,
    band_limit: Option<u32>,
) -> Result<StochasticObject> {
    let grid = ctx.grid();
    let data = sample_mu_alpha(seed, &grid);
    let snapshots =
        duhamel_walk(&data, ctx.kick_degree(), times, dt_quad, ctx, band_limit)?
            .into_iter()
            .map(|f| f.scaled(-1.0))
            .collect();
    Ok(StochasticObject {
        kind: ObjectKind::SecondOrder,
        times: times.to_vec(),
        snapshots,
        sample_index: seed.sample_index,
    })
}

/// Product object `:z^{k1}: (D(:z^k:))^{k2}`, dealiased pointwise on the
/// full product band `(k1 + k k2) N`. `k1 = k2 = 0` is the constant 1.
pub fn stochastic_product(
    seed: &SeedSpec,
    k1: u32,
    k: u32,
    k2: u32,
    times: &[f64],
    dt_quad: f64,
    ctx: &WickContext,
) -> Result<StochasticObject> {
    if k1 + 1 > k || k2 > k {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= k1 <= k-1 and 0 <= k2 <= k, got k1={k1}, k={k}, k2={k2}"
        )));
    }
    let grid = ctx.grid();
    let data = sample_mu_alpha(seed, &grid);

    let duhamel_parts = if k2 > 0 {
        Some(duhamel_walk(&data, k, times, dt_quad, ctx, None)?)
    } else {
        None
    };

    let out_band = (k1 + k * k2) * ctx.cutoff;
    let mut snapshots = Vec::with_capacity(times.len());
    for (slot, &t) in times.iter().enumerate() {
        let z_pow = if k1 > 0 {
            Some(wick_power(&linear_field_from_state(&data, t), k1, ctx)?)
        } else {
            None
        };
        let mut factors: Vec<&FourierField> = Vec::new();
        if let Some(zp) = &z_pow {
            factors.push(zp);
        }
        let d_field = duhamel_parts.as_ref().map(|p| &p[slot]);
        if let Some(d) = d_field {
            for _ in 0..k2 {
                factors.push(d);
            }
        }
        let snapshot = if factors.is_empty() {
            FourierField::constant(grid, 1.0)
        } else {
            FourierField::pointwise_product_within(&factors, out_band)?
        };
        snapshots.push(snapshot);
    }
    Ok(StochasticObject {
        kind: ObjectKind::Product { k1, k, k2 },
        times: times.to_vec(),
        snapshots,
        sample_index: seed.sample_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::bracket;
    use crate::stats::mean_var;
    use num_complex::Complex64;

    #[test]
    fn degree_one_is_the_linear_field() {
        let ctx = WickContext::new(0.9, 1, 3);
        let seed = SeedSpec::new(5, 0);
        let obj = wick_z_power(&seed, 1, &[0.0, 0.4], &ctx).unwrap();
        let z = linear_field(&seed, &ctx.grid(), 0.4);
        assert_eq!(obj.snapshots[1], z);
    }

    #[test]
    fn mode_variance_time_independent() {
        // E|z(n, t)|^2 = <n>^{-2 alpha} at every t (cos^2 + sin^2 collapse)
        let ctx = WickContext::new(0.85, 1, 3);
        let grid = ctx.grid();
        let k = 3000;
        for &t in &[0.0, 0.7] {
            for n in [[1i64, 0], [2, 1]] {
                let sq: Vec<f64> = (0..k)
                    .map(|i| linear_field(&SeedSpec::new(6, i), &grid, t).coeff(n).norm_sqr())
                    .collect();
                let (mean, _) = mean_var(&sq);
                let expect = bracket(n).powf(-2.0 * ctx.alpha);
                let se = expect / (k as f64).sqrt();
                assert!((mean - expect).abs() < 4.0 * se, "t={t} n={n:?}: {mean} vs {expect}");
            }
        }
    }

    #[test]
    fn wick_square_mean_is_centered() {
        let ctx = WickContext::new(0.85, 1, 2);
        let k = 2000;
        let zero_modes: Vec<f64> = (0..k)
            .map(|i| {
                let obj = wick_z_power(&SeedSpec::new(8, i), 2, &[0.3], &ctx).unwrap();
                obj.snapshots[0].coeff([0, 0]).re
            })
            .collect();
        let (mean, var) = mean_var(&zero_modes);
        assert!(mean.abs() <= 3.0 * (var / k as f64).sqrt());
    }

    #[test]
    fn wick_cube_moments_match_kernel_convolution() {
        // E|:z^3:(n)|^2 = 3! (c * c * c)(n) with c(n) = <n>^{-2a} 1_{|n|<=N}
        let ctx = WickContext::new(0.9, 1, 2);
        let k = 4000;
        let n_probe: crate::grid::Mode = [1, 1];
        let sq: Vec<f64> = (0..k)
            .map(|i| {
                let obj = wick_z_power(&SeedSpec::new(12, i), 3, &[0.5], &ctx).unwrap();
                obj.snapshots[0].coeff(n_probe).norm_sqr()
            })
            .collect();
        let (mean, var) = mean_var(&sq);
        // brute-force triple convolution over the ball
        let modes = crate::grid::ball_modes(2);
        let mut conv = 0.0;
        for a in &modes {
            for b in &modes {
                let c = [n_probe[0] - a[0] - b[0], n_probe[1] - a[1] - b[1]];
                if crate::grid::norm_sq(c) <= 4 {
                    conv += bracket(*a).powf(-1.8) * bracket(*b).powf(-1.8) * bracket(c).powf(-1.8);
                }
            }
        }
        let expect = 6.0 * conv;
        let se = (var / k as f64).sqrt();
        assert!((mean - expect).abs() < 4.0 * se, "{mean} vs {expect} (se {se})");
    }

    #[test]
    fn second_order_field_solves_its_equation() {
        // z2'' + (1-Lap)^alpha z2 + :z^{2m+1}: = O(dt^2), checked by finite
        // differences on the node grid
        let ctx = WickContext::new(0.9, 1, 2);
        let grid = ctx.grid();
        let seed = SeedSpec::new(19, 3);
        let data = sample_mu_alpha(&seed, &grid);
        let dt = 5e-3;
        let times: Vec<f64> = (0..=40).map(|q| q as f64 * dt).collect();
        let obj = second_order_field(&seed, &times, dt, &ctx, None).unwrap();
        assert!(obj.snapshots[0].max_abs() < 1e-14, "zero initial data");
        let mid = 20;
        let z2 = &obj.snapshots;
        let mut second_diff = z2[mid + 1].add(&z2[mid - 1]).unwrap();
        second_diff.axpy(-2.0, &z2[mid]).unwrap();
        let accel = second_diff.scaled(1.0 / (dt * dt));
        let disp = z2[mid].apply_multiplier(|n| bracket(n).powf(2.0 * ctx.alpha));
        let forcing =
            wick_power(&linear_field_from_state(&data, times[mid]), 3, &ctx).unwrap();
        let residual = accel
            .add(&disp)
            .unwrap()
            .add(&forcing.regrid(accel.grid().grid_size).unwrap())
            .unwrap();
        let scale = forcing.sobolev_norm(0.0);
        assert!(
            residual.sobolev_norm(0.0) < 30.0 * dt * dt * scale.max(1.0),
            "residual {} at dt {dt}",
            residual.sobolev_norm(0.0)
        );
    }

    #[test]
    fn empty_product_is_one() {
        let ctx = WickContext::new(0.9, 1, 2);
        let obj = stochastic_product(&SeedSpec::new(23, 0), 0, 3, 0, &[0.25], 0.05, &ctx).unwrap();
        let f = &obj.snapshots[0];
        assert!((f.coeff([0, 0]) - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((f.sobolev_norm(0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_with_k1_only_is_wick_power() {
        let ctx = WickContext::new(0.9, 1, 2);
        let seed = SeedSpec::new(29, 1);
        let obj = stochastic_product(&seed, 1, 3, 0, &[0.3], 0.05, &ctx).unwrap();
        let z = linear_field(&seed, &ctx.grid(), 0.3);
        let direct = obj.snapshots[0].regrid(z.grid().grid_size).unwrap();
        assert!(direct.sub(&z).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn product_matches_manual_composition() {
        let ctx = WickContext::new(0.9, 1, 1);
        let seed = SeedSpec::new(31, 2);
        let t = 0.2;
        let dt = 0.02;
        let obj = stochastic_product(&seed, 1, 3, 1, &[t], dt, &ctx).unwrap();
        let d = duhamel_of_wick(&seed, 3, &[t], dt, &ctx).unwrap();
        let z = linear_field(&seed, &ctx.grid(), t);
        let manual =
            FourierField::pointwise_product_within(&[&z, &d.snapshots[0]], 4 * ctx.cutoff)
                .unwrap();
        let diff = obj.snapshots[0]
            .regrid(manual.grid().grid_size)
            .unwrap()
            .sub(&manual)
            .unwrap();
        assert!(diff.max_abs() < 1e-12);
    }
}
