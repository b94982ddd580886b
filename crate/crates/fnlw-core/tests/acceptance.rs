//! Acceptance suite: one test per quantitative criterion, each printing a
//! PASS/FAIL line with the measured numbers. Scales and tolerances are
//! pinned here; the same checks back the `verify` subcommand of the CLI.

use fnlw_core::verification::{self, VerifyScale};

const MASTER_SEED: u64 = 0x464e_4c57; // "FNLW"

fn report(outcome: &fnlw_core::verification::CheckOutcome) {
    println!("{}", outcome.render());
    assert!(outcome.passed, "{}", outcome.render());
}

#[test]
fn criterion_01_hermite_identity_suite() {
    report(&verification::hermite_identities(MASTER_SEED));
}

#[test]
fn criterion_02_covariance_oracle() {
    let scale = VerifyScale::full();
    report(&verification::covariance_oracle(MASTER_SEED.wrapping_add(2), scale.covariance_samples).unwrap());
}

#[test]
fn criterion_03_cauchy_rate() {
    let scale = VerifyScale::full();
    report(&verification::cauchy_rate(MASTER_SEED.wrapping_add(3), scale.cauchy_samples).unwrap());
}

#[test]
fn criterion_04_pointwise_lower_bound() {
    let scale = VerifyScale::full();
    report(
        &verification::potential_lower_bound(MASTER_SEED.wrapping_add(4), scale.bound_samples)
            .unwrap(),
    );
}

#[test]
fn criterion_05_tail_study() {
    let scale = VerifyScale::full();
    report(&verification::tail_shape(MASTER_SEED.wrapping_add(5), scale.tail_samples).unwrap());
}

#[test]
fn criterion_06_wiener_chaos_estimate() {
    let scale = VerifyScale::full();
    report(&verification::chaos_moments(MASTER_SEED.wrapping_add(6), scale.chaos_samples).unwrap());
}

#[test]
fn criterion_07_integrator() {
    report(&verification::integrator(MASTER_SEED.wrapping_add(7)).unwrap());
}

#[test]
fn criterion_08_gibbs_invariance() {
    let scale = VerifyScale::full();
    report(
        &verification::gibbs_invariance(
            MASTER_SEED.wrapping_add(8),
            scale.invariance_samples,
            scale.control_samples,
        )
        .unwrap(),
    );
}

#[test]
fn criterion_09_regularity_exponents() {
    let scale = VerifyScale::full();
    report(
        &verification::regularity_exponents(
            MASTER_SEED.wrapping_add(9),
            scale.regularity_ensemble,
        )
        .unwrap(),
    );
}

#[test]
fn criterion_10_picard_fixed_point() {
    report(&verification::picard_fixed_point(MASTER_SEED.wrapping_add(10)).unwrap());
}

#[test]
fn criterion_11_samplers() {
    report(&verification::samplers(MASTER_SEED.wrapping_add(11)).unwrap());
}

#[test]
fn criterion_12_reproducibility() {
    report(&verification::reproducibility(MASTER_SEED.wrapping_add(12)).unwrap());
}
