//! Convergence-bound calculators and the round latency model.

pub mod bound;
pub mod latency;

pub use bound::*;
pub use latency::*;
