//! Unbiased hierarchical federated learning over UAV relay networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: deployments, line-of-sight model, association and distance laws
//! - [`analytics`]: quadrature-evaluated success probabilities of the edge,
//!   backhaul and direct links
//! - [`montecarlo`]: channel realisations, empirical success rates and
//!   brute-force expectation oracles for every analytic transform
//! - [`hfl`]: the two-level unbiased aggregation training loop and its baselines
//! - [`perf`]: convergence-bound calculators and the latency model
//!
//! Everything that consumes randomness takes an explicit seed; identical
//! inputs give bit-identical outputs regardless of thread count.

// Argument checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod error;
pub mod geometry;
pub mod hfl;
pub mod montecarlo;
pub mod perf;
pub mod seeding;

pub use error::{Error, Result};

/// Converts a threshold in dB to its linear value.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear ratio to dB.
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}
