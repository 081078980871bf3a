//! Success probabilities of the edge, backhaul and direct links.
//!
//! Each conditional success probability follows from the standard gamma
//! tail bound `P(g > x) ≈ 1 - (1 - e^{-ηx})^m` with `η = m (m!)^{-1/m}`,
//! expanded binomially. Each term then factors into a noise part and the
//! Laplace transform of the interference evaluated at the rate
//! `j η θ / (P l^-α)`.

pub mod laplace;
pub mod quadrature;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Area, ChannelParams, ClusterAssignment, LinkState, ResourceConfig, Topology};
pub use laplace::{
    laplace_back, laplace_direct, laplace_edge1, laplace_edge2, nakagami_transform,
    InterferenceField,
};
pub use quadrature::{integrate, integrate_with_breaks, QuadratureSpec};

/// Results within this distance outside `[0, 1]` are quadrature noise
/// amplified by the alternating binomial sum.
const RANGE_TOLERANCE: f64 = 1e-4;

/// Everything the formulas need besides the tagged link geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub area: Area,
    pub channel: ChannelParams,
    pub resources: ResourceConfig,
    pub n_devices: usize,
    pub n_uavs: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        Area::new(self.area.radius, self.area.uav_height)?;
        self.channel.validate()?;
        self.resources.validate()?;
        if self.n_devices == 0 || self.n_uavs == 0 {
            return Err(Error::invalid("device and UAV counts must be at least one"));
        }
        Ok(())
    }

    pub fn for_topology(
        topology: &Topology,
        channel: ChannelParams,
        resources: ResourceConfig,
    ) -> Self {
        Self {
            area: topology.area,
            channel,
            resources,
            n_devices: topology.n_devices(),
            n_uavs: topology.n_uavs(),
        }
    }

    /// Mean number of co-channel UAVs on an edge downlink, `N_u/M_b - 1`.
    pub fn edge1_interferers(&self) -> f64 {
        self.n_uavs as f64 / self.resources.rb_bs as f64 - 1.0
    }

    /// Mean number of co-channel devices on an edge uplink, `N_d/M_u - 1`.
    pub fn edge2_interferers(&self) -> f64 {
        self.n_devices as f64 / self.resources.rb_uav as f64 - 1.0
    }

    /// Mean number of co-channel UAVs on the backhaul, `N_u/M_b - 1`.
    pub fn backhaul_interferers(&self) -> f64 {
        self.n_uavs as f64 / self.resources.rb_bs as f64 - 1.0
    }

    /// Mean number of co-channel devices on a direct upload, `N_d/M_d - 1`.
    pub fn direct_interferers(&self) -> f64 {
        self.n_devices as f64 / self.resources.rb_direct as f64 - 1.0
    }
}

/// `η = m (m!)^{-1/m}`, with the factorial taken in log space.
pub fn eta(m: u32) -> f64 {
    let ln_fact: f64 = (2..=m).map(|k| f64::from(k).ln()).sum();
    f64::from(m) * (-ln_fact / f64::from(m)).exp()
}

fn ln_binomial(n: u32, k: u32) -> f64 {
    let ln_fact = |x: u32| (2..=x).map(|i| f64::from(i).ln()).sum::<f64>();
    ln_fact(n) - ln_fact(k) - ln_fact(n - k)
}

/// Probability that a link of length `distance` in a state with Nakagami
/// parameter `m` and exponent `alpha` clears the threshold:
///
/// `Σ_{j=1}^{m} C(m,j) (-1)^{j+1} exp(-s_j n0²) L(s_j)`, `s_j = j η θ / (P d^-α)`.
pub fn conditional_success<L>(
    m: u32,
    power: f64,
    distance: f64,
    alpha: f64,
    channel: &ChannelParams,
    mut laplace: L,
) -> Result<f64>
where
    L: FnMut(f64) -> Result<f64>,
{
    if m == 0 {
        return Err(Error::invalid("Nakagami parameter must be at least 1"));
    }
    let eta = eta(m);
    let rate = eta * channel.theta / (power * distance.powf(-alpha));
    let mut acc = 0.0;
    for j in 1..=m {
        let s = f64::from(j) * rate;
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        let noise = (-s * channel.noise).exp();
        if noise == 0.0 {
            continue;
        }
        acc += sign * ln_binomial(m, j).exp() * noise * laplace(s)?;
    }
    check_probability(acc)
}

fn check_probability(p: f64) -> Result<f64> {
    if !p.is_finite() || !(-RANGE_TOLERANCE..=1.0 + RANGE_TOLERANCE).contains(&p) {
        return Err(Error::numerical(format!("probability {p} outside [0, 1]")));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Per-state factors of an edge success probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeBreakdown {
    pub p_los: f64,
    /// Downlink (UAV to device) success given LoS and given NLoS.
    pub downlink: [f64; 2],
    /// Uplink (device to UAV) success given LoS and given NLoS.
    pub uplink: [f64; 2],
}

impl EdgeBreakdown {
    pub fn total(&self) -> f64 {
        self.p_los * self.downlink[0] * self.uplink[0]
            + (1.0 - self.p_los) * self.downlink[1] * self.uplink[1]
    }
}

/// Edge success with its per-state factors. `x0` and `y0` are the planar
/// offsets of the device and the serving UAV from the disk centre.
pub fn edge_breakdown(
    scenario: &Scenario,
    l_k: f64,
    x0: f64,
    y0: f64,
    spec: &QuadratureSpec,
) -> Result<EdgeBreakdown> {
    let (area, ch) = (&scenario.area, &scenario.channel);
    if l_k < area.uav_height {
        return Err(Error::invalid(format!(
            "serving distance {l_k} is below the UAV height {}",
            area.uav_height
        )));
    }
    let uplink_field = InterferenceField::edge2(y0, scenario.edge2_interferers(), area, ch, spec)?;
    let mut downlink = [0.0; 2];
    let mut uplink = [0.0; 2];
    for (i, state) in LinkState::BOTH.into_iter().enumerate() {
        let (m, alpha) = (ch.m(state), ch.alpha(state));
        let down_field = InterferenceField::edge1(
            l_k,
            x0,
            state,
            scenario.edge1_interferers(),
            area,
            ch,
            spec,
        )?;
        downlink[i] =
            conditional_success(m, ch.p_uav, l_k, alpha, ch, |s| down_field.laplace(s, spec))?;
        uplink[i] =
            conditional_success(m, ch.p_device, l_k, alpha, ch, |s| uplink_field.laplace(s, spec))?;
    }
    Ok(EdgeBreakdown {
        p_los: ch.los_model().los(l_k, area.uav_height),
        downlink,
        uplink,
    })
}

/// Probability that both legs of the edge link succeed.
pub fn edge_success(
    scenario: &Scenario,
    l_k: f64,
    x0: f64,
    y0: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_probability(edge_breakdown(scenario, l_k, x0, y0, spec)?.total())
}

/// Probability that the UAV-to-BS link of length `g_u` succeeds.
pub fn backhaul_success(scenario: &Scenario, g_u: f64, spec: &QuadratureSpec) -> Result<f64> {
    let (area, ch) = (&scenario.area, &scenario.channel);
    if g_u < area.uav_height {
        return Err(Error::invalid(format!(
            "backhaul distance {g_u} is below the UAV height {}",
            area.uav_height
        )));
    }
    let field = InterferenceField::backhaul(scenario.backhaul_interferers(), area, ch, spec)?;
    let p_los = ch.los_model().los(g_u, area.uav_height);
    let mut total = 0.0;
    for (state, weight) in [(LinkState::Los, p_los), (LinkState::Nlos, 1.0 - p_los)] {
        let p = conditional_success(ch.m(state), ch.p_uav, g_u, ch.alpha(state), ch, |s| {
            field.laplace(s, spec)
        })?;
        total += weight * p;
    }
    check_probability(total)
}

/// Probability that a device at ground distance `q_k` reaches the BS directly.
pub fn direct_success(scenario: &Scenario, q_k: f64, spec: &QuadratureSpec) -> Result<f64> {
    let ch = &scenario.channel;
    if !(q_k >= 0.0) {
        return Err(Error::invalid("direct distance must be non-negative"));
    }
    // A device on top of the BS has unbounded received power.
    if q_k == 0.0 {
        return Ok(1.0);
    }
    let n = scenario.direct_interferers();
    conditional_success(ch.m_direct, ch.p_device, q_k, ch.alpha_direct, ch, |s| {
        laplace_direct(s, n, scenario.area.radius, ch, spec)
    })
}

/// Analytic success probabilities of every link in a deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessProbabilities {
    pub edge: Vec<f64>,
    pub backhaul: Vec<f64>,
    pub direct: Vec<f64>,
}

impl SuccessProbabilities {
    /// Rejects values outside `(0, 1]`; inverse-probability weights need
    /// strictly positive probabilities.
    pub fn new(edge: Vec<f64>, backhaul: Vec<f64>, direct: Vec<f64>) -> Result<Self> {
        if edge.len() != direct.len() {
            return Err(Error::invalid("edge and direct tables must cover the same devices"));
        }
        for (name, values) in [("edge", &edge), ("backhaul", &backhaul), ("direct", &direct)] {
            if let Some((i, p)) = values
                .iter()
                .enumerate()
                .find(|(_, p)| !(**p > 0.0 && **p <= 1.0))
            {
                return Err(Error::invalid(format!(
                    "{name} success probability {p} at index {i} is not in (0, 1]"
                )));
            }
        }
        Ok(Self {
            edge,
            backhaul,
            direct,
        })
    }

    /// Perfect channels.
    pub fn ones(n_devices: usize, n_uavs: usize) -> Self {
        Self {
            edge: vec![1.0; n_devices],
            backhaul: vec![1.0; n_uavs],
            direct: vec![1.0; n_devices],
        }
    }
}

/// Raw per-link probabilities without positivity checks, for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessTable {
    pub edge: Vec<f64>,
    pub backhaul: Vec<f64>,
    pub direct: Vec<f64>,
}

impl SuccessTable {
    pub fn into_probabilities(self) -> Result<SuccessProbabilities> {
        SuccessProbabilities::new(self.edge, self.backhaul, self.direct)
    }
}

/// Evaluates all three link families for a deployment in parallel.
/// Output order follows device and UAV indices, independent of scheduling.
pub fn success_table(
    scenario: &Scenario,
    topology: &Topology,
    assignment: &ClusterAssignment,
    spec: &QuadratureSpec,
) -> Result<SuccessTable> {
    scenario.validate()?;
    spec.validate()?;
    if assignment.n_devices() != topology.n_devices() || assignment.n_uavs() != topology.n_uavs() {
        return Err(Error::invalid("assignment does not match the topology"));
    }
    let edge = (0..topology.n_devices())
        .into_par_iter()
        .map(|k| {
            let u = assignment.serving_uav[k];
            edge_success(
                scenario,
                assignment.serving_distance[k],
                topology.devices[k].norm(),
                topology.uavs[u].norm(),
                spec,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let backhaul = assignment
        .backhaul_distance
        .par_iter()
        .map(|&g| backhaul_success(scenario, g, spec))
        .collect::<Result<Vec<_>>>()?;
    let direct = (0..topology.n_devices())
        .into_par_iter()
        .map(|k| direct_success(scenario, topology.direct_distance(k), spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(SuccessTable {
        edge,
        backhaul,
        direct,
    })
}

/// Mean analytic success over devices and UAVs, averaged over seeded
/// deployments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageSuccess {
    pub edge: f64,
    pub backhaul: f64,
    pub direct: f64,
}

/// Averages the per-link success over `n_deployments` random deployments.
///
/// Deployment `i` draws its devices and `max_uavs` UAV positions from
/// `(seed, i)` and keeps the first `scenario.n_uavs` UAVs, so sweeps over
/// the UAV count compare nested UAV sets on common devices.
pub fn deployment_average(
    scenario: &Scenario,
    max_uavs: usize,
    n_deployments: usize,
    seed: u64,
    spec: &QuadratureSpec,
) -> Result<AverageSuccess> {
    scenario.validate()?;
    if n_deployments == 0 {
        return Err(Error::invalid("at least one deployment is required"));
    }
    if max_uavs < scenario.n_uavs {
        return Err(Error::invalid("max_uavs must cover the UAV count"));
    }
    let tables = (0..n_deployments)
        .into_par_iter()
        .map(|i| {
            let draw_seed = crate::seeding::derive_seed(seed, crate::seeding::Stream::Topology, i as u64);
            let base = crate::geometry::sample_topology(
                scenario.n_devices,
                max_uavs,
                scenario.area.radius,
                scenario.area.uav_height,
                draw_seed,
            )?;
            let topology = Topology::new(
                base.area,
                base.devices,
                base.uavs[..scenario.n_uavs].to_vec(),
            )?;
            let assignment = crate::geometry::associate(&topology, &scenario.channel, draw_seed);
            success_table(scenario, &topology, &assignment, spec)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = |f: fn(&SuccessTable) -> &Vec<f64>| {
        tables
            .iter()
            .map(|t| f(t).iter().sum::<f64>() / f(t).len() as f64)
            .sum::<f64>()
            / n_deployments as f64
    };
    Ok(AverageSuccess {
        edge: mean(|t| &t.edge),
        backhaul: mean(|t| &t.backhaul),
        direct: mean(|t| &t.direct),
    })
}
