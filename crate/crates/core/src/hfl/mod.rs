//! Hierarchical federated training: data handling, the MLP, the two-level
//! aggregation rules and the training loop with its baselines.

pub mod aggregate;
pub mod data;
pub mod model;
pub mod train;
