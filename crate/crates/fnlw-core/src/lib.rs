//! Pseudo-spectral simulation and Monte Carlo verification suite for the
//! Wick-renormalized fractional nonlinear wave equation
//! `u_tt + (1 - Lap)^alpha u + :u^{2m+1}: = 0` on the 2-torus.
//!
//! The crate provides:
//! - the torus discretization, projectors, and dealiased pointwise calculus
//!   ([`field`], [`grid`]),
//! - Hermite/Wick renormalization ([`wick`]),
//! - sampling from the free-field measure, the renormalized potential, and
//!   its exact covariance oracle ([`measure`]),
//! - the symplectic truncated flow, stochastic objects, and Picard
//!   fixed-point solvers ([`dynamics`], [`stochastic`], [`picard`]),
//! - Gibbs sampling and invariance testing ([`mcmc`]),
//! - decay-exponent fitting and report inputs ([`fitting`]),
//! - binary snapshot io ([`snapshot`]) and the verification suite
//!   ([`verification`]).

pub mod dynamics;
pub mod error;
pub mod fft;
pub mod field;
pub mod fitting;
pub mod grid;
pub mod mcmc;
pub mod measure;
pub mod picard;
pub mod snapshot;
pub mod stats;
pub mod stochastic;
pub mod verification;
pub mod wick;

pub use error::{Error, Result};
pub use field::{FourierField, PhaseState};
pub use grid::{bracket, discrete_conv_sum, GridSpec, Mode};
pub use measure::{sample_mu_alpha, SeedSpec};
pub use stats::EnsembleReport;
pub use wick::{hermite, hermite_min, sigma_variance, wick_power, WickContext};
