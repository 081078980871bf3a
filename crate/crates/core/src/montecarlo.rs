//! Channel realisations and brute-force oracles.
//!
//! Two kinds of simulation live here. [`realize_round`] draws one block of
//! fading, LoS states and resource-block assignments for a whole deployment
//! and is what the training loop consumes. [`simulate_link_sinr`] and
//! [`laplace_oracle`] instead tag a single link with fixed geometry and
//! redraw the interferer positions every trial, which is the setting the
//! analytic formulas describe.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::Scenario;
use crate::error::{Error, Result};
use crate::geometry::{
    uniform_in_disk, ClusterAssignment, LinkState, LinkStates, Point, Topology,
};
use crate::seeding::{derive_seed, SimRng, Stream};
use rand::SeedableRng;

/// Trials per independently seeded chunk.
const CHUNK: usize = 1024;

/// Rejection-sampling budget for one conditioned interferer.
const MAX_REJECTIONS: usize = 100_000;

/// Path loss is singular at zero distance; ground distances are floored here.
const MIN_GROUND_DISTANCE: f64 = 1e-3;

/// Unit-mean Gamma(m, 1/m) power gain of a Nakagami-`m` channel.
pub fn sample_nakagami_power<R: Rng + ?Sized>(m: u32, rng: &mut R) -> Result<f64> {
    let g = gamma(m)?;
    Ok(g.sample(rng))
}

fn gamma(m: u32) -> Result<Gamma<f64>> {
    if m == 0 {
        return Err(Error::invalid("Nakagami parameter must be at least 1"));
    }
    let m = f64::from(m);
    Gamma::new(m, 1.0 / m).map_err(|e| Error::invalid(format!("Nakagami law: {e}")))
}

/// Fading laws of the three link families, built once per simulation.
#[derive(Debug, Clone)]
pub struct Fading {
    los: Gamma<f64>,
    nlos: Gamma<f64>,
    direct: Gamma<f64>,
}

impl Fading {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let ch = &scenario.channel;
        Ok(Self {
            los: gamma(ch.m_los)?,
            nlos: gamma(ch.m_nlos)?,
            direct: gamma(ch.m_direct)?,
        })
    }

    pub fn link<R: Rng + ?Sized>(&self, state: LinkState, rng: &mut R) -> f64 {
        match state {
            LinkState::Los => self.los.sample(rng),
            LinkState::Nlos => self.nlos.sample(rng),
        }
    }

    pub fn direct<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.direct.sample(rng)
    }
}

/// Balanced random allocation: a random permutation of the transmitters is
/// dealt round-robin over the resource blocks. Returns each transmitter's
/// block index.
pub fn allocate_rbs<R: Rng + ?Sized>(
    n_transmitters: usize,
    n_rbs: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if n_transmitters == 0 || n_rbs == 0 {
        return Err(Error::invalid("allocation needs at least one transmitter and one block"));
    }
    let mut order: Vec<usize> = (0..n_transmitters).collect();
    order.shuffle(rng);
    let mut rb = vec![0; n_transmitters];
    for (slot, &t) in order.iter().enumerate() {
        rb[t] = slot % n_rbs;
    }
    Ok(rb)
}

/// Number of other transmitters sharing transmitter `tagged`'s block.
pub fn co_channel_count(allocation: &[usize], tagged: usize) -> usize {
    let rb = allocation[tagged];
    allocation.iter().filter(|&&b| b == rb).count() - 1
}

/// Expected co-channel count of a uniformly chosen transmitter under the
/// balanced allocation. Equals `n/n_rbs - 1` only when `n_rbs` divides `n`.
pub fn expected_co_channel(n_transmitters: usize, n_rbs: usize) -> f64 {
    let (n, b) = (n_transmitters, n_rbs);
    let base = n / b;
    let larger = n % b;
    let sq = larger * (base + 1) * base + (b - larger) * base * base.saturating_sub(1);
    sq as f64 / n as f64
}

/// SINR with the no-noise, no-interference case defined as infinite.
#[inline]
pub fn sinr(signal: f64, noise_plus_interference: f64) -> f64 {
    if noise_plus_interference == 0.0 {
        f64::INFINITY
    } else {
        signal / noise_plus_interference
    }
}

/// How uplink resource blocks are shared among devices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UplinkAllocation {
    /// Each UAV deals its blocks among its own cluster; devices of other
    /// clusters on the same block index interfere.
    #[default]
    PerCluster,
    /// All devices are dealt over one shared pool of blocks.
    Global,
}

/// Success indicators of every link at one threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Indicators {
    /// Joint downlink and uplink success per device.
    pub edge: Vec<bool>,
    pub backhaul: Vec<bool>,
    pub direct: Vec<bool>,
}

/// One block-fading realisation of a whole deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub states: LinkStates,
    /// Block of each UAV, shared by its backhaul and downlink transmissions.
    pub uav_rb: Vec<usize>,
    pub uplink_rb: Vec<usize>,
    pub direct_rb: Vec<usize>,
    pub backhaul_sinr: Vec<f64>,
    /// UAV-to-device SINR at each device.
    pub downlink_sinr: Vec<f64>,
    /// Device-to-UAV SINR at each device's serving UAV.
    pub uplink_sinr: Vec<f64>,
    pub direct_sinr: Vec<f64>,
    pub theta: f64,
    pub indicators: Indicators,
}

impl ChannelRealization {
    pub fn indicators_at(&self, theta: f64) -> Indicators {
        Indicators {
            edge: self
                .downlink_sinr
                .iter()
                .zip(&self.uplink_sinr)
                .map(|(d, u)| *d > theta && *u > theta)
                .collect(),
            backhaul: self.backhaul_sinr.iter().map(|s| *s > theta).collect(),
            direct: self.direct_sinr.iter().map(|s| *s > theta).collect(),
        }
    }
}

/// Draws fading for every link, allocates blocks and evaluates all SINRs.
///
/// `states` fixes the LoS state of every link; with `None` they are redrawn
/// from the elevation model. Fading is independent per link and direction.
pub fn realize_round<R: Rng + ?Sized>(
    topology: &Topology,
    assignment: &ClusterAssignment,
    scenario: &Scenario,
    states: Option<&LinkStates>,
    uplink: UplinkAllocation,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let n_d = topology.n_devices();
    let n_u = topology.n_uavs();
    if assignment.n_devices() != n_d || assignment.n_uavs() != n_u {
        return Err(Error::invalid("assignment does not match the topology"));
    }
    let ch = &scenario.channel;
    let res = &scenario.resources;
    let fading = Fading::new(scenario)?;
    let states = match states {
        Some(s) if s.matches(topology) => s.clone(),
        Some(_) => return Err(Error::invalid("link states do not match the topology")),
        None => LinkStates::sample(topology, &ch.los_model(), rng),
    };
    let path = |r: f64, state: LinkState| r.powf(-ch.alpha(state));

    let uav_rb = allocate_rbs(n_u, res.rb_bs, rng)?;
    let uplink_rb = match uplink {
        UplinkAllocation::Global => allocate_rbs(n_d, res.rb_uav, rng)?,
        UplinkAllocation::PerCluster => {
            let mut rb = vec![0; n_d];
            for members in assignment.clusters() {
                if members.is_empty() {
                    continue;
                }
                let local = allocate_rbs(members.len(), res.rb_uav, rng)?;
                for (&k, b) in members.iter().zip(local) {
                    rb[k] = b;
                }
            }
            rb
        }
    };
    let direct_rb = allocate_rbs(n_d, res.rb_direct, rng)?;

    let mut backhaul_sinr = Vec::with_capacity(n_u);
    for u in 0..n_u {
        let g = topology.backhaul_distance(u);
        let signal = ch.p_uav * fading.link(states.backhaul(u), rng) * path(g, states.backhaul(u));
        let mut interference = 0.0;
        for v in (0..n_u).filter(|&v| v != u && uav_rb[v] == uav_rb[u]) {
            let s = states.backhaul(v);
            interference += ch.p_uav * fading.link(s, rng) * path(topology.backhaul_distance(v), s);
        }
        backhaul_sinr.push(sinr(signal, ch.noise + interference));
    }

    let mut downlink_sinr = Vec::with_capacity(n_d);
    let mut uplink_sinr = Vec::with_capacity(n_d);
    for k in 0..n_d {
        let u = assignment.serving_uav[k];
        let l = topology.edge_distance(k, u);
        let z = states.edge(k, u);

        let signal = ch.p_uav * fading.link(z, rng) * path(l, z);
        let mut interference = 0.0;
        for v in (0..n_u).filter(|&v| v != u && uav_rb[v] == uav_rb[u]) {
            let s = states.edge(k, v);
            interference += ch.p_uav * fading.link(s, rng) * path(topology.edge_distance(k, v), s);
        }
        downlink_sinr.push(sinr(signal, ch.noise + interference));

        let signal = ch.p_device * fading.link(z, rng) * path(l, z);
        let mut interference = 0.0;
        for j in (0..n_d).filter(|&j| j != k && uplink_rb[j] == uplink_rb[k]) {
            let s = states.edge(j, u);
            interference +=
                ch.p_device * fading.link(s, rng) * path(topology.edge_distance(j, u), s);
        }
        uplink_sinr.push(sinr(signal, ch.noise + interference));
    }

    let direct_path = |k: usize| {
        topology
            .direct_distance(k)
            .max(MIN_GROUND_DISTANCE)
            .powf(-ch.alpha_direct)
    };
    let mut direct_sinr = Vec::with_capacity(n_d);
    for k in 0..n_d {
        let signal = ch.p_device * fading.direct(rng) * direct_path(k);
        let mut interference = 0.0;
        for j in (0..n_d).filter(|&j| j != k && direct_rb[j] == direct_rb[k]) {
            interference += ch.p_device * fading.direct(rng) * direct_path(j);
        }
        direct_sinr.push(sinr(signal, ch.noise + interference));
    }

    let mut out = ChannelRealization {
        states,
        uav_rb,
        uplink_rb,
        direct_rb,
        backhaul_sinr,
        downlink_sinr,
        uplink_sinr,
        direct_sinr,
        theta: ch.theta,
        indicators: Indicators {
            edge: Vec::new(),
            backhaul: Vec::new(),
            direct: Vec::new(),
        },
    };
    out.indicators = out.indicators_at(ch.theta);
    Ok(out)
}

/// Law of one interferer's received power, used by the tagged-link
/// simulations and the transform oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterfererModel {
    /// A UAV seen by a device at planar offset `x0`, conditioned on arriving
    /// with lower average power than the serving UAV (the association rule).
    Edge1 {
        x0: f64,
        serving_distance: f64,
        serving_state: LinkState,
    },
    /// A device seen by a UAV at planar offset `y0`.
    Edge2 { y0: f64 },
    /// A UAV seen by the base station.
    Backhaul,
    /// A ground device seen by the base station.
    Direct,
}

impl InterfererModel {
    pub fn sample_power<R: Rng + ?Sized>(
        &self,
        scenario: &Scenario,
        fading: &Fading,
        rng: &mut R,
    ) -> Result<f64> {
        let ch = &scenario.channel;
        let area = &scenario.area;
        let h = area.uav_height;
        let los = ch.los_model();
        let state_at = |r: f64, rng: &mut R| {
            if rng.random::<f64>() < los.los(r, h) {
                LinkState::Los
            } else {
                LinkState::Nlos
            }
        };
        match *self {
            InterfererModel::Edge1 {
                x0,
                serving_distance,
                serving_state,
            } => {
                let receiver = Point::new(x0, 0.0);
                let ceiling = serving_distance.powf(-ch.alpha(serving_state));
                for _ in 0..MAX_REJECTIONS {
                    let r = area.slant(uniform_in_disk(rng, area.radius).distance(&receiver));
                    let s = state_at(r, rng);
                    let gain = r.powf(-ch.alpha(s));
                    if gain <= ceiling {
                        return Ok(ch.p_uav * fading.link(s, rng) * gain);
                    }
                }
                Err(Error::numerical(format!(
                    "no interferer weaker than a serving link of {serving_distance} m \
                     after {MAX_REJECTIONS} draws"
                )))
            }
            InterfererModel::Edge2 { y0 } => {
                let receiver = Point::new(y0, 0.0);
                let r = area.slant(uniform_in_disk(rng, area.radius).distance(&receiver));
                let s = state_at(r, rng);
                Ok(ch.p_device * fading.link(s, rng) * r.powf(-ch.alpha(s)))
            }
            InterfererModel::Backhaul => {
                let r = area.slant(uniform_in_disk(rng, area.radius).norm());
                let s = state_at(r, rng);
                Ok(ch.p_uav * fading.link(s, rng) * r.powf(-ch.alpha(s)))
            }
            InterfererModel::Direct => {
                let q = uniform_in_disk(rng, area.radius).norm().max(MIN_GROUND_DISTANCE);
                Ok(ch.p_device * fading.direct(rng) * q.powf(-ch.alpha_direct))
            }
        }
    }
}

/// Runs `n` items in seeded chunks on the rayon pool and concatenates the
/// results in chunk order.
fn chunked<T, F>(n: usize, seed: u64, stream: Stream, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut SimRng) -> Result<Vec<T>> + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(n - c * CHUNK);
            let mut rng = SimRng::seed_from_u64(derive_seed(seed, stream, c as u64));
            f(len, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// Brute-force `E[exp(-s I)]` for `n_interferers` i.i.d. interferers.
///
/// Integer counts sum that many interferers per draw. Fractional counts
/// raise the single-interferer sample mean to the power `n_interferers`,
/// mirroring how the analytic transform treats a mean interferer count.
pub fn laplace_oracle(
    model: InterfererModel,
    s: f64,
    n_interferers: f64,
    scenario: &Scenario,
    n_draws: usize,
    seed: u64,
) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::invalid("transform argument must be non-negative"));
    }
    if n_draws == 0 {
        return Err(Error::invalid("at least one draw is required"));
    }
    if n_interferers <= 0.0 || s == 0.0 {
        return Ok(1.0);
    }
    let fading = Fading::new(scenario)?;
    let integer = n_interferers.fract() == 0.0;
    let per_draw = if integer { n_interferers as usize } else { 1 };
    let values = chunked(n_draws, seed, Stream::Oracle, |len, rng| {
        (0..len)
            .map(|_| {
                let mut total = 0.0;
                for _ in 0..per_draw {
                    total += model.sample_power(scenario, &fading, rng)?;
                }
                Ok((-s * total).exp())
            })
            .collect()
    })?;
    let mean = values.iter().sum::<f64>() / n_draws as f64;
    Ok(if integer { mean } else { mean.powf(n_interferers) })
}

/// A single tagged link with fixed geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LinkTarget {
    Edge { device: Point, uav: Point },
    Backhaul { uav: Point },
    Direct { device: Point },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Edge,
    Backhaul,
    Direct,
}

impl LinkTarget {
    /// The link of `index` (a device for edge and direct, a UAV for backhaul)
    /// in a deployment.
    pub fn from_deployment(
        topology: &Topology,
        assignment: &ClusterAssignment,
        kind: LinkKind,
        index: usize,
    ) -> Result<Self> {
        let (n, what) = match kind {
            LinkKind::Backhaul => (topology.n_uavs(), "UAV"),
            _ => (topology.n_devices(), "device"),
        };
        if index >= n {
            return Err(Error::invalid(format!("{what} index {index} out of range")));
        }
        Ok(match kind {
            LinkKind::Edge => LinkTarget::Edge {
                device: topology.devices[index],
                uav: topology.uavs[assignment.serving_uav[index]],
            },
            LinkKind::Backhaul => LinkTarget::Backhaul {
                uav: topology.uavs[index],
            },
            LinkKind::Direct => LinkTarget::Direct {
                device: topology.devices[index],
            },
        })
    }
}

/// Draws `n_trials` independent SINR samples of a tagged link. For the edge
/// link each sample is the smaller of the downlink and uplink SINRs, so the
/// joint success event is `sample > θ`.
///
/// Each trial redraws the tagged link's LoS state and fading, the number of
/// co-channel transmitters from a fresh balanced allocation, and every
/// interferer's position, state and fading.
pub fn simulate_link_sinr(
    scenario: &Scenario,
    target: LinkTarget,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    scenario.validate()?;
    if n_trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    let ch = &scenario.channel;
    let res = &scenario.resources;
    let area = &scenario.area;
    let h = area.uav_height;
    let los = ch.los_model();
    let fading = Fading::new(scenario)?;
    for p in match target {
        LinkTarget::Edge { device, uav } => vec![device, uav],
        LinkTarget::Backhaul { uav } => vec![uav],
        LinkTarget::Direct { device } => vec![device],
    } {
        if p.norm() > area.radius * (1.0 + 1e-9) {
            return Err(Error::invalid("target lies outside the deployment disk"));
        }
    }

    chunked(n_trials, seed, Stream::Trials, |len, rng| {
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            let sample = match target {
                LinkTarget::Edge { device, uav } => {
                    let l = area.slant(device.distance(&uav));
                    let z = if rng.random::<f64>() < los.los(l, h) {
                        LinkState::Los
                    } else {
                        LinkState::Nlos
                    };
                    let gain = l.powf(-ch.alpha(z));
                    let down_model = InterfererModel::Edge1 {
                        x0: device.norm(),
                        serving_distance: l,
                        serving_state: z,
                    };
                    let n1 = co_channel_count(&allocate_rbs(scenario.n_uavs, res.rb_bs, rng)?, 0);
                    let mut i1 = 0.0;
                    for _ in 0..n1 {
                        i1 += down_model.sample_power(scenario, &fading, rng)?;
                    }
                    let down = sinr(ch.p_uav * fading.link(z, rng) * gain, ch.noise + i1);

                    let up_model = InterfererModel::Edge2 { y0: uav.norm() };
                    let n2 =
                        co_channel_count(&allocate_rbs(scenario.n_devices, res.rb_uav, rng)?, 0);
                    let mut i2 = 0.0;
                    for _ in 0..n2 {
                        i2 += up_model.sample_power(scenario, &fading, rng)?;
                    }
                    let up = sinr(ch.p_device * fading.link(z, rng) * gain, ch.noise + i2);
                    down.min(up)
                }
                LinkTarget::Backhaul { uav } => {
                    let g = area.slant(uav.norm());
                    let z = if rng.random::<f64>() < los.los(g, h) {
                        LinkState::Los
                    } else {
                        LinkState::Nlos
                    };
                    let n = co_channel_count(&allocate_rbs(scenario.n_uavs, res.rb_bs, rng)?, 0);
                    let mut i = 0.0;
                    for _ in 0..n {
                        i += InterfererModel::Backhaul.sample_power(scenario, &fading, rng)?;
                    }
                    sinr(ch.p_uav * fading.link(z, rng) * g.powf(-ch.alpha(z)), ch.noise + i)
                }
                LinkTarget::Direct { device } => {
                    let q = device.norm().max(MIN_GROUND_DISTANCE);
                    let n =
                        co_channel_count(&allocate_rbs(scenario.n_devices, res.rb_direct, rng)?, 0);
                    let mut i = 0.0;
                    for _ in 0..n {
                        i += InterfererModel::Direct.sample_power(scenario, &fading, rng)?;
                    }
                    sinr(
                        ch.p_device * fading.direct(rng) * q.powf(-ch.alpha_direct),
                        ch.noise + i,
                    )
                }
            };
            out.push(sample);
        }
        Ok(out)
    })
}

/// Success frequency with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessEstimate {
    pub probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub successes: u64,
    pub trials: u64,
}

impl SuccessEstimate {
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        let n = trials as f64;
        let p = successes as f64 / n;
        let half = 1.96 * (p * (1.0 - p) / n).sqrt();
        Self {
            probability: p,
            ci_low: (p - half).max(0.0),
            ci_high: (p + half).min(1.0),
            successes,
            trials,
        }
    }

    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

/// Empirical success at each threshold from one shared set of trials.
pub fn empirical_success_curve(
    scenario: &Scenario,
    target: LinkTarget,
    thetas: &[f64],
    n_trials: usize,
    seed: u64,
) -> Result<Vec<SuccessEstimate>> {
    let samples = simulate_link_sinr(scenario, target, n_trials, seed)?;
    Ok(thetas
        .iter()
        .map(|&t| {
            let hits = samples.iter().filter(|&&s| s > t).count() as u64;
            SuccessEstimate::from_counts(hits, samples.len() as u64)
        })
        .collect())
}

/// Empirical success of one link of a deployment at the scenario threshold.
pub fn empirical_success(
    topology: &Topology,
    assignment: &ClusterAssignment,
    scenario: &Scenario,
    kind: LinkKind,
    index: usize,
    n_trials: usize,
    seed: u64,
) -> Result<SuccessEstimate> {
    let target = LinkTarget::from_deployment(topology, assignment, kind, index)?;
    let curve =
        empirical_success_curve(scenario, target, &[scenario.channel.theta], n_trials, seed)?;
    Ok(curve[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{associate, sample_topology, Area, ChannelParams, ResourceConfig};
    use crate::seeding::rng_for;

    fn table_one() -> Scenario {
        Scenario {
            area: Area::new(500.0, 120.0).unwrap(),
            channel: ChannelParams::default(),
            resources: ResourceConfig::default(),
            n_devices: 50,
            n_uavs: 10,
        }
    }

    #[test]
    fn rayleigh_power_has_unit_mean() {
        let mut rng = rng_for(1, Stream::Oracle, 0);
        let n = 1_000_000;
        let mean: f64 =
            (0..n).map(|_| sample_nakagami_power(1, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn nakagami_four_variance() {
        let mut rng = rng_for(2, Stream::Oracle, 0);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_nakagami_power(4, &mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((var - 0.25).abs() < 0.01, "{var}");
    }

    #[test]
    fn nakagami_is_reproducible() {
        let a: Vec<f64> = {
            let mut rng = rng_for(3, Stream::Oracle, 0);
            (0..5).map(|_| sample_nakagami_power(2, &mut rng).unwrap()).collect()
        };
        let mut rng = rng_for(3, Stream::Oracle, 0);
        let b: Vec<f64> = (0..5).map(|_| sample_nakagami_power(2, &mut rng).unwrap()).collect();
        assert_eq!(a, b);
        assert!(sample_nakagami_power(0, &mut rng).is_err());
    }

    #[test]
    fn ten_uavs_on_five_blocks_pair_up() {
        let mut rng = rng_for(4, Stream::Oracle, 0);
        for _ in 0..100 {
            let rb = allocate_rbs(10, 5, &mut rng).unwrap();
            for b in 0..5 {
                assert_eq!(rb.iter().filter(|&&x| x == b).count(), 2);
            }
            assert!((0..10).all(|t| co_channel_count(&rb, t) == 1));
        }
    }

    #[test]
    fn few_transmitters_never_share() {
        let mut rng = rng_for(5, Stream::Oracle, 0);
        let rb = allocate_rbs(4, 5, &mut rng).unwrap();
        let mut seen = rb.clone();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn mean_co_channel_count() {
        let mut rng = rng_for(6, Stream::Oracle, 0);
        for (n, b) in [(10usize, 5usize), (50, 15), (50, 20), (7, 3)] {
            let trials = 10_000;
            let mut total = 0usize;
            for _ in 0..trials {
                let rb = allocate_rbs(n, b, &mut rng).unwrap();
                total += co_channel_count(&rb, rng.random_range(0..n));
            }
            let mean = total as f64 / trials as f64;
            // Group sizes are floor and ceil of n/b; a uniformly chosen
            // member of a group of size c sees c - 1 others.
            let (lo, hi) = (n / b, n / b + 1);
            let n_hi = n % b;
            let exact = (n_hi * hi * (hi - 1) + (b - n_hi) * lo * (lo.max(1) - 1)) as f64 / n as f64;
            assert!((expected_co_channel(n, b) - exact).abs() < 1e-12);
            assert!((mean - exact).abs() < 0.02, "n={n} b={b}: {mean} vs {exact}");
            if n % b == 0 {
                assert!((exact - (n as f64 / b as f64 - 1.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_isolated_link_is_infinite() {
        let topo = Topology::new(
            Area::new(100.0, 50.0).unwrap(),
            vec![Point::new(10.0, 0.0)],
            vec![Point::new(0.0, 0.0)],
        )
        .unwrap();
        let mut sc = table_one();
        sc.channel.noise = 0.0;
        sc.n_devices = 1;
        sc.n_uavs = 1;
        let assignment = associate(&topo, &sc.channel, 0);
        let states = LinkStates::uniform(1, 1, LinkState::Los);
        let mut rng = rng_for(7, Stream::Oracle, 0);
        let r = realize_round(&topo, &assignment, &sc, Some(&states), UplinkAllocation::PerCluster, &mut rng)
            .unwrap();
        assert!(r.downlink_sinr[0].is_infinite() && r.uplink_sinr[0].is_infinite());
        assert!(r.backhaul_sinr[0].is_infinite() && r.direct_sinr[0].is_infinite());
        assert!(r.indicators.edge[0] && r.indicators.backhaul[0] && r.indicators.direct[0]);
    }

    /// Median of Gamma(m, 1/m) for integer m by bisection on the Erlang CDF.
    fn gamma_median(m: u32) -> f64 {
        let cdf = |x: f64| {
            let y = f64::from(m) * x;
            let mut term = 1.0;
            let mut tail = 1.0;
            for k in 1..m {
                term *= y / f64::from(k);
                tail += term;
            }
            1.0 - (-y).exp() * tail
        };
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn interference_free_median_sinr() {
        let topo = Topology::new(
            Area::new(500.0, 120.0).unwrap(),
            vec![Point::new(200.0, 0.0)],
            vec![Point::new(50.0, 0.0)],
        )
        .unwrap();
        let mut sc = table_one();
        sc.n_devices = 1;
        sc.n_uavs = 1;
        let assignment = associate(&topo, &sc.channel, 0);
        let states = LinkStates::uniform(1, 1, LinkState::Los);
        let mut rng = rng_for(8, Stream::Oracle, 0);
        let mut down: Vec<f64> = (0..100_000)
            .map(|_| {
                realize_round(&topo, &assignment, &sc, Some(&states), UplinkAllocation::PerCluster, &mut rng)
                    .unwrap()
                    .downlink_sinr[0]
            })
            .collect();
        down.sort_by(f64::total_cmp);
        let median = down[50_000];
        let l = topo.edge_distance(0, 0);
        let expected = sc.channel.p_uav * gamma_median(4) * l.powf(-2.0) / sc.channel.noise;
        assert!((median / expected - 1.0).abs() < 0.02, "{median} vs {expected}");
    }

    #[test]
    fn indicators_are_monotone_in_threshold() {
        let topo = sample_topology(50, 10, 500.0, 120.0, 9).unwrap();
        let sc = table_one();
        let assignment = associate(&topo, &sc.channel, 9);
        let mut rng = rng_for(9, Stream::Realization, 0);
        for _ in 0..20 {
            let r = realize_round(&topo, &assignment, &sc, None, UplinkAllocation::PerCluster, &mut rng)
                .unwrap();
            let mut prev = r.indicators_at(1e-6);
            for db in -20..=10 {
                let now = r.indicators_at(crate::db_to_linear(f64::from(db)));
                for (a, b) in [(&prev.edge, &now.edge), (&prev.backhaul, &now.backhaul), (&prev.direct, &now.direct)] {
                    assert!(a.iter().zip(b).all(|(x, y)| *x || !*y));
                }
                prev = now;
            }
        }
    }

    #[test]
    fn per_cluster_allocation_respects_blocks() {
        let topo = sample_topology(50, 10, 500.0, 120.0, 10).unwrap();
        let sc = table_one();
        let assignment = associate(&topo, &sc.channel, 10);
        let mut rng = rng_for(10, Stream::Realization, 0);
        let r = realize_round(&topo, &assignment, &sc, None, UplinkAllocation::PerCluster, &mut rng)
            .unwrap();
        for members in assignment.clusters() {
            let mut blocks: Vec<usize> = members.iter().map(|&k| r.uplink_rb[k]).collect();
            assert!(blocks.iter().all(|&b| b < 15));
            if members.len() <= 15 {
                blocks.sort();
                blocks.dedup();
                assert_eq!(blocks.len(), members.len());
            }
        }
    }

    #[test]
    fn vanishing_threshold_always_succeeds() {
        let sc = table_one();
        let target = LinkTarget::Edge {
            device: Point::new(200.0, 0.0),
            uav: Point::new(60.0, 0.0),
        };
        let est = empirical_success_curve(&sc, target, &[1e-12], 2_000, 1).unwrap();
        assert_eq!(est[0].probability, 1.0);
    }

    #[test]
    fn interval_shrinks_with_square_root() {
        let sc = table_one();
        let target = LinkTarget::Backhaul {
            uav: Point::new(30.0, 282.0),
        };
        let a = empirical_success_curve(&sc, target, &[sc.channel.theta], 5_000, 2).unwrap()[0];
        let b = empirical_success_curve(&sc, target, &[sc.channel.theta], 20_000, 3).unwrap()[0];
        let ratio = a.ci_width() / b.ci_width();
        assert!((ratio / 2.0 - 1.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn trials_are_deterministic() {
        let sc = table_one();
        let target = LinkTarget::Edge {
            device: Point::new(-162.0, 362.0),
            uav: Point::new(30.0, 282.0),
        };
        let a = simulate_link_sinr(&sc, target, 3_000, 42).unwrap();
        let b = simulate_link_sinr(&sc, target, 3_000, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate_link_sinr(&sc, target, 3_000, 43).unwrap();
        assert_ne!(a, c);
    }
}
