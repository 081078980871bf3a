//! The hierarchical training loop and its three baselines.
//!
//! Every device runs one local SGD step per iteration. Every `E` iterations
//! the UAVs aggregate the models of their clusters that arrive over the
//! edge links; every `G` iterations the base station aggregates the UAV
//! models that arrive over the backhaul and broadcasts the result. The
//! FedAvg baselines skip the UAVs and aggregate device models over the
//! direct links every `G` iterations.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{success_table, QuadratureSpec, Scenario, SuccessProbabilities};
use crate::error::{Error, Result};
use crate::geometry::{
    associate_with_link_states, association_states, ChannelParams, ClusterAssignment, LinkStates,
    ResourceConfig, Topology,
};
use crate::hfl::aggregate::{bs_aggregate, uav_aggregate};
use crate::hfl::data::{DataPartition, Dataset};
use crate::hfl::model::{Mlp, ModelParams};
use crate::montecarlo::{realize_round, ChannelRealization, Indicators, UplinkAllocation};
use crate::perf::latency::{latency_compute, latency_link, latency_round, UavLatency};
use crate::seeding::{derive_seed, rng_for, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    UnbiasedHfl,
    ConventionalHfl,
    UnbiasedFedavg,
    Fedavg,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::UnbiasedHfl,
        Variant::ConventionalHfl,
        Variant::UnbiasedFedavg,
        Variant::Fedavg,
    ];

    pub fn is_hierarchical(self) -> bool {
        matches!(self, Variant::UnbiasedHfl | Variant::ConventionalHfl)
    }

    pub fn is_unbiased(self) -> bool {
        matches!(self, Variant::UnbiasedHfl | Variant::UnbiasedFedavg)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::UnbiasedHfl => "unbiased-hfl",
            Variant::ConventionalHfl => "conventional-hfl",
            Variant::UnbiasedFedavg => "unbiased-fedavg",
            Variant::Fedavg => "fedavg",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown variant {s:?}")))
    }
}

/// Where the success indicators come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelSource {
    /// SINR thresholding of a full channel realisation per aggregation.
    #[default]
    Network,
    /// Independent Bernoulli draws with the analytic probabilities.
    Bernoulli,
    /// Every transmission succeeds.
    Perfect,
}

/// Whether LoS states stay at their association-time values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatePolicy {
    #[default]
    Fixed,
    PerRound,
}

/// Computation and model-size parameters of the latency model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyParams {
    pub cycles_per_sample: f64,
    pub cpu_frequency: f64,
    /// Bits per transmitted model; `None` means 32 bits per parameter.
    pub model_bits: Option<f64>,
}

impl Default for LatencyParams {
    fn default() -> Self {
        Self {
            cycles_per_sample: 20.0,
            cpu_frequency: 2e9,
            model_bits: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub local_period: usize,
    pub global_period: usize,
    pub total_iterations: usize,
    pub batch_size: usize,
    pub variant: Variant,
    pub seed: u64,
    pub channel: ChannelSource,
    pub states: StatePolicy,
    pub uplink: UplinkAllocation,
    pub latency: LatencyParams,
    /// Ends the run at the first global round reaching this accuracy.
    pub stop_at_accuracy: Option<f64>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            local_period: 2,
            global_period: 2,
            total_iterations: 1000,
            batch_size: 64,
            variant: Variant::UnbiasedHfl,
            seed: 0,
            channel: ChannelSource::Network,
            states: StatePolicy::Fixed,
            uplink: UplinkAllocation::PerCluster,
            latency: LatencyParams::default(),
            stop_at_accuracy: None,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be finite and non-negative"));
        }
        if self.local_period == 0 {
            return Err(Error::invalid("local period must be at least 1"));
        }
        if self.global_period == 0 || !self.global_period.is_multiple_of(self.local_period) {
            return Err(Error::invalid("global period must be a multiple of the local period"));
        }
        if self.total_iterations < self.global_period {
            return Err(Error::invalid("total iterations must cover one global period"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        let l = &self.latency;
        if !(l.cycles_per_sample >= 0.0 && l.cpu_frequency > 0.0) {
            return Err(Error::invalid("latency parameters must be positive"));
        }
        if let Some(z) = l.model_bits {
            if !(z > 0.0 && z.is_finite()) {
                return Err(Error::invalid("model size must be positive"));
            }
        }
        Ok(())
    }
}

/// One global round of a training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Iterations completed when the row was recorded.
    pub iteration: usize,
    /// Accuracy of the global model on the union of all device data.
    pub accuracy: f64,
    pub loss: f64,
    /// Mean local mini-batch loss over the round, weighted by `p_k`.
    pub train_loss: f64,
    /// Successful edge uploads summed over the round's UAV aggregations.
    pub edge_successes: usize,
    pub backhaul_successes: usize,
    pub direct_successes: usize,
    /// Cumulative simulated wall-clock time in seconds.
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub variant: Variant,
    pub rows: Vec<TraceRow>,
}

impl TrainingTrace {
    /// First recorded iteration at which accuracy reaches `target`.
    pub fn iterations_to(&self, target: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.accuracy >= target).map(|r| r.iteration)
    }

    /// Cumulative latency when accuracy first reaches `target`.
    pub fn latency_to(&self, target: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.accuracy >= target).map(|r| r.latency)
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.rows.last().map(|r| r.accuracy)
    }
}

/// A deployment as seen by the training loop.
#[derive(Debug, Clone, Copy)]
pub struct Network<'a> {
    pub scenario: &'a Scenario,
    pub topology: &'a Topology,
    pub assignment: &'a ClusterAssignment,
    /// LoS states drawn at association time.
    pub states: &'a LinkStates,
    /// Analytic success probabilities used in the inverse weights.
    pub probabilities: &'a SuccessProbabilities,
}

/// Owned deployment: topology, association, the association-time LoS
/// states and the analytic success probabilities of every link.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub scenario: Scenario,
    pub topology: Topology,
    pub assignment: ClusterAssignment,
    pub states: LinkStates,
    pub probabilities: SuccessProbabilities,
}

impl Deployment {
    /// Associates the devices of `topology` (LoS states seeded by `seed`)
    /// and evaluates the analytic success probabilities.
    pub fn new(
        topology: Topology,
        channel: ChannelParams,
        resources: ResourceConfig,
        seed: u64,
        spec: &QuadratureSpec,
    ) -> Result<Self> {
        let states = association_states(&topology, &channel, seed);
        let assignment = associate_with_link_states(&topology, &channel, &states);
        let scenario = Scenario::for_topology(&topology, channel, resources);
        let probabilities =
            success_table(&scenario, &topology, &assignment, spec)?.into_probabilities()?;
        Ok(Self {
            scenario,
            topology,
            assignment,
            states,
            probabilities,
        })
    }

    pub fn network(&self) -> Network<'_> {
        Network {
            scenario: &self.scenario,
            topology: &self.topology,
            assignment: &self.assignment,
            states: &self.states,
            probabilities: &self.probabilities,
        }
    }
}

/// One local SGD step on a mini-batch of `batch_size` samples drawn without
/// replacement from `shard` (the whole shard when it is smaller).
pub fn local_sgd_step<R: Rng + ?Sized>(
    model: &Mlp,
    params: &mut ModelParams,
    data: &Dataset,
    shard: &[usize],
    learning_rate: f64,
    batch_size: usize,
    rng: &mut R,
) -> Result<f64> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    if shard.is_empty() {
        return Err(Error::invalid("cannot train on an empty shard"));
    }
    let batch: Vec<usize> = if batch_size >= shard.len() {
        shard.to_vec()
    } else {
        let mut picks = sample(rng, shard.len(), batch_size).into_vec();
        picks.sort_unstable();
        picks.into_iter().map(|i| shard[i]).collect()
    };
    model.sgd_step(params, data, &batch, learning_rate)
}

/// Success indicators and SINRs for one aggregation event.
struct Event {
    indicators: Indicators,
    realization: ChannelRealization,
}

fn draw_event(
    net: &Network<'_>,
    config: &TrainingConfig,
    index: usize,
) -> Result<Event> {
    let mut rng = rng_for(config.seed, Stream::Realization, index as u64);
    let states = match config.states {
        StatePolicy::Fixed => Some(net.states),
        StatePolicy::PerRound => None,
    };
    let realization = realize_round(
        net.topology,
        net.assignment,
        net.scenario,
        states,
        config.uplink,
        &mut rng,
    )?;
    let indicators = match config.channel {
        ChannelSource::Network => realization.indicators.clone(),
        ChannelSource::Bernoulli => {
            let mut rng = rng_for(config.seed, Stream::Indicators, index as u64);
            let p = net.probabilities;
            let mut draw = |probs: &[f64]| -> Vec<bool> {
                probs.iter().map(|q| rng.random::<f64>() < *q).collect()
            };
            let edge = draw(&p.edge);
            let backhaul = draw(&p.backhaul);
            let direct = draw(&p.direct);
            Indicators {
                edge,
                backhaul,
                direct,
            }
        }
        ChannelSource::Perfect => Indicators {
            edge: vec![true; realization.downlink_sinr.len()],
            backhaul: vec![true; realization.backhaul_sinr.len()],
            direct: vec![true; realization.direct_sinr.len()],
        },
    };
    Ok(Event {
        indicators,
        realization,
    })
}

fn check_inputs(
    net: &Network<'_>,
    data: &Dataset,
    partition: &DataPartition,
    model: &Mlp,
    config: &TrainingConfig,
) -> Result<()> {
    config.validate()?;
    net.scenario.validate()?;
    let n_d = net.topology.n_devices();
    let n_u = net.topology.n_uavs();
    if net.assignment.n_devices() != n_d || net.assignment.n_uavs() != n_u {
        return Err(Error::invalid("assignment does not match the topology"));
    }
    if !net.states.matches(net.topology) {
        return Err(Error::invalid("link states do not match the topology"));
    }
    let p = net.probabilities;
    if p.edge.len() != n_d || p.direct.len() != n_d || p.backhaul.len() != n_u {
        return Err(Error::invalid("success probabilities do not match the topology"));
    }
    if partition.n_devices() != n_d {
        return Err(Error::invalid("partition does not match the device count"));
    }
    if partition.total() == 0 {
        return Err(Error::invalid("partition holds no samples"));
    }
    if partition.indices.iter().flatten().any(|&i| i >= data.len()) {
        return Err(Error::invalid("partition refers to samples outside the dataset"));
    }
    if data.dim != model.input || data.classes > model.classes {
        return Err(Error::invalid("dataset shape does not match the network"));
    }
    Ok(())
}

/// Per-device computation time of one local iteration.
fn compute_times(partition: &DataPartition, config: &TrainingConfig) -> Vec<f64> {
    partition
        .counts()
        .into_iter()
        .map(|n| latency_compute(config.latency.cycles_per_sample, n as f64, config.latency.cpu_frequency))
        .collect()
}

/// Time of one global round of the hierarchical scheme under `realization`.
fn hierarchical_round_time(
    net: &Network<'_>,
    clusters: &[Vec<usize>],
    realization: &ChannelRealization,
    bits: f64,
    t_cmp: &[f64],
    config: &TrainingConfig,
) -> f64 {
    let res = &net.scenario.resources;
    let uavs: Vec<UavLatency> = clusters
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(u, members)| UavLatency {
            downlink: members
                .iter()
                .map(|&k| latency_link(bits, res.bandwidth_device, realization.downlink_sinr[k]))
                .collect(),
            uplink: members
                .iter()
                .map(|&k| latency_link(bits, res.bandwidth_device, realization.uplink_sinr[k]))
                .collect(),
            backhaul: latency_link(bits, res.bandwidth_uav, realization.backhaul_sinr[u]),
            compute: members.iter().map(|&k| t_cmp[k]).collect(),
        })
        .collect();
    latency_round(&uavs, config.local_period, config.global_period)
}

/// Time of one global round of FedAvg: the slowest direct upload plus `G`
/// local iterations of the slowest device.
fn direct_round_time(
    net: &Network<'_>,
    realization: &ChannelRealization,
    bits: f64,
    t_cmp: &[f64],
    config: &TrainingConfig,
) -> f64 {
    let res = &net.scenario.resources;
    let upload = realization
        .direct_sinr
        .iter()
        .map(|&s| latency_link(bits, res.bandwidth_device, s))
        .fold(0.0, f64::max);
    let compute = t_cmp.iter().copied().fold(0.0, f64::max);
    upload + config.global_period as f64 * compute
}

/// Runs `config.total_iterations` iterations of the selected variant and
/// records the global model after every global aggregation.
pub fn train(
    net: &Network<'_>,
    data: &Dataset,
    partition: &DataPartition,
    model: &Mlp,
    config: &TrainingConfig,
) -> Result<TrainingTrace> {
    check_inputs(net, data, partition, model, config)?;
    let n_d = net.topology.n_devices();
    let variant = config.variant;
    let clusters = net.assignment.clusters();
    let p_k = partition.device_weights();
    let p_u = partition.cluster_weights(&clusters);
    let probs = if variant.is_unbiased() {
        net.probabilities.clone()
    } else {
        SuccessProbabilities::ones(n_d, net.topology.n_uavs())
    };
    let bits = config
        .latency
        .model_bits
        .unwrap_or(32.0 * model.n_params() as f64);
    let t_cmp = compute_times(partition, config);
    let (e, g) = (config.local_period, config.global_period);

    let mut w_bar = model.init(&mut rng_for(config.seed, Stream::ModelInit, 0));
    let mut uav_models = vec![w_bar.clone(); clusters.len()];
    let mut devices = vec![w_bar.clone(); n_d];
    let mut rows = Vec::new();
    let mut latency = 0.0;
    let mut round_loss = 0.0;
    let mut edge_successes = 0;

    for t in 0..config.total_iterations {
        let losses: Vec<f64> = devices
            .par_iter_mut()
            .enumerate()
            .map(|(k, w)| {
                let shard = &partition.indices[k];
                if shard.is_empty() {
                    return Ok(0.0);
                }
                let stream = derive_seed(config.seed, Stream::LocalSgd, t as u64);
                let mut rng = rng_for(stream, Stream::LocalSgd, k as u64);
                local_sgd_step(model, w, data, shard, config.learning_rate, config.batch_size, &mut rng)
            })
            .collect::<Result<_>>()?;
        round_loss += losses.iter().zip(&p_k).map(|(l, p)| l * p).sum::<f64>();

        let done = t + 1;
        if done % e != 0 {
            continue;
        }
        let at_global = done % g == 0;
        if !variant.is_hierarchical() && !at_global {
            continue;
        }
        let event = draw_event(net, config, done / e)?;
        let ind = &event.indicators;
        let mut backhaul_successes = 0;
        let mut direct_successes = 0;

        if variant.is_hierarchical() {
            for (u, members) in clusters.iter().enumerate() {
                if members.is_empty() {
                    continue;
                }
                let inputs: Vec<&ModelParams> = members.iter().map(|&k| &devices[k]).collect();
                let weights: Vec<f64> = members.iter().map(|&k| p_k[k] / p_u[u]).collect();
                let flags: Vec<bool> = members.iter().map(|&k| ind.edge[k]).collect();
                let p_edge: Vec<f64> = members.iter().map(|&k| probs.edge[k]).collect();
                edge_successes += flags.iter().filter(|f| **f).count();
                uav_models[u] = uav_aggregate(&uav_models[u], &inputs, &weights, &flags, &p_edge)?;
                if !at_global {
                    for &k in members {
                        devices[k].clone_from(&uav_models[u]);
                    }
                }
            }
            if at_global {
                let active: Vec<usize> = (0..clusters.len()).filter(|&u| !clusters[u].is_empty()).collect();
                let inputs: Vec<&ModelParams> = active.iter().map(|&u| &uav_models[u]).collect();
                let weights: Vec<f64> = active.iter().map(|&u| p_u[u]).collect();
                let flags: Vec<bool> = active.iter().map(|&u| ind.backhaul[u]).collect();
                let p_back: Vec<f64> = active.iter().map(|&u| probs.backhaul[u]).collect();
                backhaul_successes = flags.iter().filter(|f| **f).count();
                w_bar = bs_aggregate(&w_bar, &inputs, &weights, &flags, &p_back)?;
                latency += hierarchical_round_time(net, &clusters, &event.realization, bits, &t_cmp, config);
            }
        } else {
            let inputs: Vec<&ModelParams> = devices.iter().collect();
            direct_successes = ind.direct.iter().filter(|f| **f).count();
            w_bar = bs_aggregate(&w_bar, &inputs, &p_k, &ind.direct, &probs.direct)?;
            latency += direct_round_time(net, &event.realization, bits, &t_cmp, config);
        }

        if at_global {
            if !w_bar.is_finite() {
                return Err(Error::numerical(format!("global model diverged at iteration {done}")));
            }
            for v in uav_models.iter_mut() {
                v.clone_from(&w_bar);
            }
            for w in devices.iter_mut() {
                w.clone_from(&w_bar);
            }
            let eval = model.evaluate(&w_bar, data)?;
            rows.push(TraceRow {
                iteration: done,
                accuracy: eval.accuracy,
                loss: eval.loss,
                train_loss: round_loss / g as f64,
                edge_successes,
                backhaul_successes,
                direct_successes,
                latency,
            });
            round_loss = 0.0;
            edge_successes = 0;
            if config.stop_at_accuracy.is_some_and(|a| eval.accuracy >= a) {
                break;
            }
        }
    }
    Ok(TrainingTrace { variant, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{success_table, QuadratureSpec};
    use crate::geometry::{
        association_states, associate_with_link_states, sample_topology, ChannelParams,
        ResourceConfig,
    };
    use crate::hfl::data::{partition_noniid, synthetic_blobs};

    struct Fixture {
        scenario: Scenario,
        topology: Topology,
        assignment: ClusterAssignment,
        states: LinkStates,
        probabilities: SuccessProbabilities,
        data: Dataset,
        partition: DataPartition,
        model: Mlp,
    }

    impl Fixture {
        fn new(n_d: usize, n_u: usize, seed: u64) -> Self {
            let channel = ChannelParams::default();
            let topology = sample_topology(n_d, n_u, 500.0, 120.0, seed).unwrap();
            let states = association_states(&topology, &channel, seed);
            let assignment = associate_with_link_states(&topology, &channel, &states);
            let scenario = Scenario::for_topology(&topology, channel, ResourceConfig::default());
            let probabilities = success_table(&scenario, &topology, &assignment, &QuadratureSpec::default())
                .unwrap()
                .into_probabilities()
                .unwrap();
            let data = synthetic_blobs(n_d * 20, 4, 3, 3.0, seed).unwrap();
            let partition =
                partition_noniid(&data, n_d, 2, &mut rng_for(seed, Stream::Partition, 0)).unwrap();
            Self {
                scenario,
                topology,
                assignment,
                states,
                probabilities,
                data,
                partition,
                model: Mlp::new(4, 5, 3).unwrap(),
            }
        }

        fn net(&self) -> Network<'_> {
            Network {
                scenario: &self.scenario,
                topology: &self.topology,
                assignment: &self.assignment,
                states: &self.states,
                probabilities: &self.probabilities,
            }
        }
    }

    #[test]
    fn variants_parse_by_name() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("hfl".parse::<Variant>().is_err());
    }

    #[test]
    fn config_rejects_bad_periods() {
        let mut c = TrainingConfig {
            local_period: 2,
            global_period: 3,
            ..TrainingConfig::default()
        };
        assert!(c.validate().is_err());
        c.global_period = 4;
        c.total_iterations = 2;
        assert!(c.validate().is_err());
        c.total_iterations = 8;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn eta_zero_keeps_model() {
        let f = Fixture::new(6, 2, 1);
        let mut w = f.model.init(&mut rng_for(1, Stream::ModelInit, 0));
        let before = w.clone();
        let mut rng = rng_for(1, Stream::LocalSgd, 0);
        local_sgd_step(&f.model, &mut w, &f.data, &f.partition.indices[0], 0.0, 4, &mut rng).unwrap();
        assert_eq!(w, before);
    }

    /// With perfect channels and E = G = 1, every variant reduces to
    /// full-participation weighted FedAvg, replayed here by hand.
    #[test]
    fn perfect_channels_collapse_to_fedavg() {
        let f = Fixture::new(8, 3, 2);
        let config = TrainingConfig {
            local_period: 1,
            global_period: 1,
            total_iterations: 5,
            batch_size: 4,
            learning_rate: 0.1,
            seed: 9,
            channel: ChannelSource::Perfect,
            ..TrainingConfig::default()
        };
        let p_k = f.partition.device_weights();
        let mut w = f.model.init(&mut rng_for(9, Stream::ModelInit, 0));
        let mut expected = Vec::new();
        for t in 0..5u64 {
            let mut next = vec![0.0; w.len()];
            for k in 0..8 {
                let mut local = w.clone();
                let stream = derive_seed(9, Stream::LocalSgd, t);
                let mut rng = rng_for(stream, Stream::LocalSgd, k as u64);
                local_sgd_step(&f.model, &mut local, &f.data, &f.partition.indices[k], 0.1, 4, &mut rng)
                    .unwrap();
                for (n, x) in next.iter_mut().zip(&local.0) {
                    *n += p_k[k] * x;
                }
            }
            w = ModelParams(next);
            expected.push(f.model.evaluate(&w, &f.data).unwrap().accuracy);
        }
        let ones = SuccessProbabilities::ones(8, 3);
        let net = Network {
            probabilities: &ones,
            ..f.net()
        };
        for variant in Variant::ALL {
            let trace = train(&net, &f.data, &f.partition, &f.model, &TrainingConfig { variant, ..config }).unwrap();
            let got: Vec<f64> = trace.rows.iter().map(|r| r.accuracy).collect();
            assert_eq!(got, expected, "{variant}");
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let f = Fixture::new(10, 3, 3);
        for channel in [ChannelSource::Network, ChannelSource::Bernoulli] {
            let config = TrainingConfig {
                total_iterations: 12,
                local_period: 2,
                global_period: 4,
                batch_size: 5,
                learning_rate: 0.05,
                channel,
                seed: 4,
                ..TrainingConfig::default()
            };
            let a = train(&f.net(), &f.data, &f.partition, &f.model, &config).unwrap();
            let b = train(&f.net(), &f.data, &f.partition, &f.model, &config).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.rows.len(), 3);
            assert!(a.rows.windows(2).all(|w| w[1].iteration > w[0].iteration));
            assert!(a.rows.windows(2).all(|w| w[1].latency > w[0].latency));
            assert!(a.rows.iter().all(|r| (0.0..=1.0).contains(&r.accuracy)));
        }
    }

    #[test]
    fn trace_queries() {
        let row = |iteration, accuracy, latency| TraceRow {
            iteration,
            accuracy,
            loss: 0.0,
            train_loss: 0.0,
            edge_successes: 0,
            backhaul_successes: 0,
            direct_successes: 0,
            latency,
        };
        let trace = TrainingTrace {
            variant: Variant::Fedavg,
            rows: vec![row(2, 0.5, 1.0), row(4, 0.9, 2.5), row(6, 0.8, 3.0)],
        };
        assert_eq!(trace.iterations_to(0.85), Some(4));
        assert_eq!(trace.latency_to(0.85), Some(2.5));
        assert_eq!(trace.iterations_to(0.95), None);
        assert_eq!(trace.final_accuracy(), Some(0.8));
    }
}
