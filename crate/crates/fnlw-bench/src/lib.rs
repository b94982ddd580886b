//! Shared fixtures for the kernel benchmarks.

use fnlw_core::field::PhaseState;
use fnlw_core::measure::{sample_mu_alpha, SeedSpec};
use fnlw_core::wick::WickContext;

pub fn fixture(cutoff: u32, alpha: f64) -> (WickContext, PhaseState) {
    let ctx = WickContext::new(alpha, 1, cutoff);
    let state = sample_mu_alpha(&SeedSpec::new(42, 0), &ctx.grid());
    (ctx, state)
}
