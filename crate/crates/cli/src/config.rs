//! Experiment configuration: a flat JSON object whose keys mirror the
//! system-parameter symbols. Absent keys take their defaults, unknown keys
//! are rejected, and thresholds in dB carry a `_db` suffix.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uavhfl::analytics::QuadratureSpec;
use uavhfl::geometry::{Area, ChannelParams, ResourceConfig};
use uavhfl::hfl::train::{
    ChannelSource, LatencyParams, StatePolicy, TrainingConfig, Variant,
};
use uavhfl::montecarlo::UplinkAllocation;
use uavhfl::perf::{BoundInputs, BTerms, ConstantTerms};

/// A problem with the configuration itself, reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,

    // Deployment.
    pub n_devices: usize,
    pub n_uavs: usize,
    pub radius: f64,
    pub height: f64,

    // Radio.
    pub p_device: f64,
    pub p_uav: f64,
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    pub noise: f64,
    pub env_a: f64,
    pub env_b: f64,
    pub m_los: u32,
    pub m_nlos: u32,
    pub theta_db: f64,
    pub m_direct: u32,
    pub alpha_direct: f64,
    pub rb_bs: usize,
    pub rb_uav: usize,
    pub rb_direct: usize,
    pub bandwidth_device: f64,
    pub bandwidth_uav: f64,

    // Computation.
    pub cpu_frequency: f64,
    pub cycles_per_sample: f64,
    /// Bits per transmitted model; absent means 32 bits per parameter.
    pub model_bits: Option<f64>,

    // Training.
    pub learning_rate: f64,
    pub batch_size: usize,
    pub local_period: usize,
    pub global_period: usize,
    pub total_iterations: usize,
    /// Variant for `train`; absent runs all four.
    pub variant: Option<Variant>,
    pub channel_source: ChannelSource,
    pub state_policy: StatePolicy,
    pub uplink_allocation: UplinkAllocation,
    pub accuracy_target: f64,
    /// Extra `(E, G)` pairs trained by `train` for the unbiased scheme.
    pub period_grid: Vec<[usize; 2]>,
    pub training_seeds: usize,

    // Data and model.
    pub samples_per_device: usize,
    pub input_dim: usize,
    pub classes: usize,
    pub separation: f64,
    pub hidden: usize,
    pub labels_per_device: usize,
    pub idx_images: Option<PathBuf>,
    pub idx_labels: Option<PathBuf>,

    // Sweeps.
    pub theta_grid_db: Vec<f64>,
    pub height_grid: Vec<f64>,
    pub uav_grid: Vec<usize>,
    pub model_bits_grid: Vec<f64>,
    pub latency_global_periods: Vec<usize>,
    pub n_deployments: usize,
    pub sweep_training: bool,
    pub trials: usize,
    pub pairs: usize,

    // Convergence bound.
    pub lipschitz: f64,
    pub upward_divergence: f64,
    pub downward_divergence: f64,
    pub global_divergence: f64,
    pub grad_bound_uav: f64,
    pub grad_bound_device: f64,
    pub initial_gap: f64,
    pub bound_learning_rate: f64,
    pub bound_horizon: usize,
    pub bound_constants: ConstantTerms,
    pub improvement_m: f64,
    pub improvement_l: f64,
    pub b_grid: Vec<f64>,

    // Quadrature.
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ch = ChannelParams::default();
        let res = ResourceConfig::default();
        let q = QuadratureSpec::default();
        let lat = LatencyParams::default();
        let t = TrainingConfig::default();
        Self {
            seed: 2024,
            n_devices: 50,
            n_uavs: 10,
            radius: 500.0,
            height: 120.0,
            p_device: ch.p_device,
            p_uav: ch.p_uav,
            alpha_los: ch.alpha_los,
            alpha_nlos: ch.alpha_nlos,
            noise: ch.noise,
            env_a: ch.env_a,
            env_b: ch.env_b,
            m_los: ch.m_los,
            m_nlos: ch.m_nlos,
            theta_db: -5.0,
            m_direct: ch.m_direct,
            alpha_direct: ch.alpha_direct,
            rb_bs: res.rb_bs,
            rb_uav: res.rb_uav,
            rb_direct: res.rb_direct,
            bandwidth_device: res.bandwidth_device,
            bandwidth_uav: res.bandwidth_uav,
            cpu_frequency: lat.cpu_frequency,
            cycles_per_sample: lat.cycles_per_sample,
            model_bits: None,
            learning_rate: 0.1,
            batch_size: t.batch_size,
            local_period: t.local_period,
            global_period: t.global_period,
            total_iterations: 2000,
            variant: None,
            channel_source: ChannelSource::Network,
            state_policy: StatePolicy::Fixed,
            uplink_allocation: UplinkAllocation::PerCluster,
            accuracy_target: 0.85,
            period_grid: Vec::new(),
            training_seeds: 1,
            samples_per_device: 200,
            input_dim: 32,
            classes: 10,
            separation: 4.0,
            hidden: 32,
            labels_per_device: 2,
            idx_images: None,
            idx_labels: None,
            theta_grid_db: (-4..=2).map(|i| f64::from(i) * 5.0).collect(),
            height_grid: (1..=100).map(|i| f64::from(i) * 10.0).collect(),
            uav_grid: vec![5, 8, 10, 12, 15, 18, 20],
            model_bits_grid: vec![1e4, 5e4, 1e5, 5e5, 1e6],
            latency_global_periods: vec![2, 4],
            n_deployments: 30,
            sweep_training: false,
            trials: 50_000,
            pairs: 5,
            lipschitz: 1.0,
            upward_divergence: 1.0,
            downward_divergence: 1.0,
            global_divergence: 1.0,
            grad_bound_uav: 1.0,
            grad_bound_device: 1.0,
            initial_gap: 1.0,
            bound_learning_rate: 0.01,
            bound_horizon: 1000,
            bound_constants: ConstantTerms::Squared,
            improvement_m: 1.0,
            improvement_l: 1.5,
            b_grid: (0..=10).map(|i| f64::from(i) / 5.0).collect(),
            rel_tol: q.rel_tol,
            abs_tol: q.abs_tol,
            max_subdivisions: q.max_subdivisions,
        }
    }
}

/// Parses a JSON document; errors name the offending key path.
pub fn parse(text: &str) -> anyhow::Result<ExperimentConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        config_error(format!("at `{path}`: {}", e.inner()))
    })?;
    de.end().map_err(|e| config_error(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load(path: Option<&Path>) -> anyhow::Result<ExperimentConfig> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| config_error(format!("{}: {e}", p.display())))?;
            parse(&text)
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        let wrap = |field: &str, r: uavhfl::Result<()>| {
            r.map_err(|e| config_error(format!("{field}: {e}")))
        };
        wrap("deployment", self.area().map(|_| ()))?;
        wrap("channel", self.channel().validate())?;
        wrap("resources", self.resources().validate())?;
        wrap("quadrature", self.quadrature().validate())?;
        wrap("training", self.training(Variant::UnbiasedHfl).validate())?;
        if self.n_devices == 0 || self.n_uavs == 0 {
            return Err(config_error("n_devices and n_uavs must be positive"));
        }
        if self.samples_per_device == 0 || self.input_dim == 0 || self.hidden == 0 || self.classes < 2 {
            return Err(config_error("dataset and model sizes must be positive"));
        }
        if self.labels_per_device == 0 {
            return Err(config_error("labels_per_device must be positive"));
        }
        if !(0.0..=1.0).contains(&self.accuracy_target) {
            return Err(config_error("accuracy_target must lie in [0, 1]"));
        }
        if self.idx_images.is_some() != self.idx_labels.is_some() {
            return Err(config_error("idx_images and idx_labels must be given together"));
        }
        for [e, g] in &self.period_grid {
            if *e == 0 || g % e != 0 {
                return Err(config_error(format!("period_grid entry [{e}, {g}] is not a valid (E, G) pair")));
            }
        }
        if self.training_seeds == 0 || self.n_deployments == 0 || self.pairs == 0 || self.trials == 0 {
            return Err(config_error("training_seeds, n_deployments, pairs and trials must be positive"));
        }
        if self.pairs > self.n_devices {
            return Err(config_error("pairs cannot exceed n_devices"));
        }
        if self.height_grid.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(config_error("height_grid entries must be positive"));
        }
        if self.uav_grid.contains(&0) {
            return Err(config_error("uav_grid entries must be positive"));
        }
        if self.model_bits_grid.iter().any(|z| z.is_nan() || *z <= 0.0) {
            return Err(config_error("model_bits_grid entries must be positive"));
        }
        if self
            .latency_global_periods
            .iter()
            .any(|g| *g == 0 || g % self.local_period != 0)
        {
            return Err(config_error("latency_global_periods must be multiples of local_period"));
        }
        if self.theta_grid_db.iter().any(|t| !t.is_finite()) {
            return Err(config_error("theta_grid_db entries must be finite"));
        }
        Ok(())
    }

    pub fn area(&self) -> uavhfl::Result<Area> {
        Area::new(self.radius, self.height)
    }

    pub fn channel(&self) -> ChannelParams {
        ChannelParams {
            alpha_los: self.alpha_los,
            alpha_nlos: self.alpha_nlos,
            m_los: self.m_los,
            m_nlos: self.m_nlos,
            env_a: self.env_a,
            env_b: self.env_b,
            p_device: self.p_device,
            p_uav: self.p_uav,
            noise: self.noise,
            theta: uavhfl::db_to_linear(self.theta_db),
            m_direct: self.m_direct,
            alpha_direct: self.alpha_direct,
        }
    }

    pub fn resources(&self) -> ResourceConfig {
        ResourceConfig {
            rb_bs: self.rb_bs,
            rb_uav: self.rb_uav,
            rb_direct: self.rb_direct,
            bandwidth_device: self.bandwidth_device,
            bandwidth_uav: self.bandwidth_uav,
        }
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_subdivisions: self.max_subdivisions,
        }
    }

    pub fn training(&self, variant: Variant) -> TrainingConfig {
        TrainingConfig {
            learning_rate: self.learning_rate,
            local_period: self.local_period,
            global_period: self.global_period,
            total_iterations: self.total_iterations,
            batch_size: self.batch_size,
            variant,
            seed: self.seed,
            channel: self.channel_source,
            states: self.state_policy,
            uplink: self.uplink_allocation,
            latency: LatencyParams {
                cycles_per_sample: self.cycles_per_sample,
                cpu_frequency: self.cpu_frequency,
                model_bits: self.model_bits,
            },
            stop_at_accuracy: None,
        }
    }

    pub fn bound_inputs(&self, b: BTerms, total_samples: f64) -> BoundInputs {
        BoundInputs {
            lipschitz: self.lipschitz,
            upward_divergence: self.upward_divergence,
            downward_divergence: self.downward_divergence,
            global_divergence: self.global_divergence,
            grad_bound_uav: self.grad_bound_uav,
            grad_bound_device: self.grad_bound_device,
            learning_rate: self.bound_learning_rate,
            local_period: self.local_period,
            global_period: self.global_period,
            horizon: self.bound_horizon,
            initial_gap: self.initial_gap,
            b,
            cluster_weight_sum: 1.0,
            total_samples,
            n_uavs: self.n_uavs,
            constants: self.bound_constants,
        }
    }
}
