//! Inverse-probability-weighted aggregation at the UAVs and at the base
//! station.
//!
//! Both levels apply `v ← v + Σ_i (w_i / P_i) · 𝕀_i · (x_i − v)`. When every
//! indicator is an independent Bernoulli(P_i) draw, the expected result is
//! the full-participation average `Σ_i w_i x_i` (for weights summing to one).

use crate::error::{Error, Result};
use crate::hfl::model::ModelParams;

fn correct(
    prev: &ModelParams,
    inputs: &[&ModelParams],
    weights: &[f64],
    indicators: &[bool],
    probabilities: &[f64],
) -> Result<ModelParams> {
    let n = inputs.len();
    if weights.len() != n || indicators.len() != n || probabilities.len() != n {
        return Err(Error::invalid("aggregation inputs differ in length"));
    }
    if let Some(p) = probabilities.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::invalid(format!("success probability {p} is not in (0, 1]")));
    }
    if inputs.iter().any(|x| x.len() != prev.len()) {
        return Err(Error::invalid("model dimensions differ"));
    }
    let mut out = prev.clone();
    // Fixed summation order: by input index.
    for i in (0..n).filter(|&i| indicators[i]) {
        let c = weights[i] / probabilities[i];
        for ((o, x), v) in out.0.iter_mut().zip(&inputs[i].0).zip(&prev.0) {
            *o += c * (x - v);
        }
    }
    Ok(out)
}

/// UAV-level update from member device models. `p_over_pu` holds
/// `p_k / p̄_u` for each member, `p_edge` the edge success probabilities.
pub fn uav_aggregate(
    prev_v: &ModelParams,
    members: &[&ModelParams],
    p_over_pu: &[f64],
    indicators: &[bool],
    p_edge: &[f64],
) -> Result<ModelParams> {
    correct(prev_v, members, p_over_pu, indicators, p_edge)
}

/// Base-station update from UAV models with cluster weights `p̄_u` and
/// backhaul success probabilities.
pub fn bs_aggregate(
    prev_w: &ModelParams,
    uav_models: &[&ModelParams],
    p_u: &[f64],
    indicators: &[bool],
    p_back: &[f64],
) -> Result<ModelParams> {
    correct(prev_w, uav_models, p_u, indicators, p_back)
}
