//! One function per subcommand. Each builds its inputs from the config,
//! runs the library, and writes CSV artifacts.

use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;
use uavhfl::analytics::{
    backhaul_success, deployment_average, direct_success, edge_success, success_table, Scenario,
};
use uavhfl::geometry::sample_topology;
use uavhfl::hfl::data::{load_idx, partition_noniid, synthetic_blobs, DataPartition, Dataset};
use uavhfl::hfl::model::Mlp;
use uavhfl::hfl::train::{train, Deployment, TrainingConfig, TrainingTrace, Variant};
use uavhfl::montecarlo::{empirical_success_curve, LinkKind, LinkTarget};
use uavhfl::perf::{
    compute_b_terms, convergence_bound_terms, convergence_bound_uniform_terms, improvement_surface,
    max_local_scaling, ConstantTerms,
};
use uavhfl::seeding::{derive_seed, rng_for, Stream};

use crate::config::ExperimentConfig;
use crate::output::Output;

fn deployment(cfg: &ExperimentConfig, n_uavs: usize, seed: u64) -> anyhow::Result<Deployment> {
    deployment_at(cfg, n_uavs, cfg.height, seed)
}

fn deployment_at(
    cfg: &ExperimentConfig,
    n_uavs: usize,
    height: f64,
    seed: u64,
) -> anyhow::Result<Deployment> {
    let topology = sample_topology(cfg.n_devices, n_uavs, cfg.radius, height, seed)?;
    Ok(Deployment::new(
        topology,
        cfg.channel(),
        cfg.resources(),
        seed,
        &cfg.quadrature(),
    )?)
}

/// Devices of the tagged pairs: evenly spaced device indices.
fn pair_devices(cfg: &ExperimentConfig) -> Vec<usize> {
    (0..cfg.pairs).map(|i| i * cfg.n_devices / cfg.pairs).collect()
}

struct Learning {
    data: Dataset,
    partition: DataPartition,
    model: Mlp,
}

fn learning(cfg: &ExperimentConfig, seed: u64) -> anyhow::Result<Learning> {
    let data = match (&cfg.idx_images, &cfg.idx_labels) {
        (Some(images), Some(labels)) => load_idx(images, labels)?,
        _ => synthetic_blobs(
            cfg.n_devices * cfg.samples_per_device,
            cfg.input_dim,
            cfg.classes,
            cfg.separation,
            seed,
        )?,
    };
    let partition = partition_noniid(
        &data,
        cfg.n_devices,
        cfg.labels_per_device,
        &mut rng_for(seed, Stream::Partition, 0),
    )?;
    let model = Mlp::new(data.dim, cfg.hidden, data.classes)?;
    Ok(Learning {
        data,
        partition,
        model,
    })
}

fn run(dep: &Deployment, l: &Learning, config: &TrainingConfig) -> anyhow::Result<TrainingTrace> {
    train(&dep.network(), &l.data, &l.partition, &l.model, config)
        .with_context(|| format!("training {} with seed {}", config.variant, config.seed))
}

fn training_seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    (0..cfg.training_seeds as u64).map(|i| cfg.seed + i).collect()
}

#[derive(Serialize)]
struct ProbeRow {
    link: LinkKind,
    index: usize,
    serving_uav: Option<usize>,
    distance: f64,
    probability: f64,
}

pub fn probe(cfg: &ExperimentConfig, out: &Output) -> anyhow::Result<()> {
    let topology = sample_topology(cfg.n_devices, cfg.n_uavs, cfg.radius, cfg.height, cfg.seed)?;
    let assignment = uavhfl::geometry::associate(&topology, &cfg.channel(), cfg.seed);
    let scenario = Scenario::for_topology(&topology, cfg.channel(), cfg.resources());
    let table = success_table(&scenario, &topology, &assignment, &cfg.quadrature())?;
    let mut rows = Vec::new();
    for (k, p) in table.edge.iter().enumerate() {
        rows.push(ProbeRow {
            link: LinkKind::Edge,
            index: k,
            serving_uav: Some(assignment.serving_uav[k]),
            distance: assignment.serving_distance[k],
            probability: *p,
        });
    }
    for (u, p) in table.backhaul.iter().enumerate() {
        rows.push(ProbeRow {
            link: LinkKind::Backhaul,
            index: u,
            serving_uav: None,
            distance: assignment.backhaul_distance[u],
            probability: *p,
        });
    }
    for (k, p) in table.direct.iter().enumerate() {
        rows.push(ProbeRow {
            link: LinkKind::Direct,
            index: k,
            serving_uav: None,
            distance: topology.direct_distance(k),
            probability: *p,
        });
    }
    out.write("probe", &rows)?;
    Ok(())
}

#[derive(Serialize)]
struct ValidateRow {
    theta_db: f64,
    pair: usize,
    link: LinkKind,
    device: usize,
    uav: usize,
    analytic: f64,
    empirical: f64,
    ci_lo: f64,
    ci_hi: f64,
}

pub fn validate(cfg: &ExperimentConfig, out: &Output) -> anyhow::Result<()> {
    let topology = sample_topology(cfg.n_devices, cfg.n_uavs, cfg.radius, cfg.height, cfg.seed)?;
    let assignment = uavhfl::geometry::associate(&topology, &cfg.channel(), cfg.seed);
    let scenario = Scenario::for_topology(&topology, cfg.channel(), cfg.resources());
    let q = cfg.quadrature();
    let linear: Vec<f64> = cfg.theta_grid_db.iter().map(|t| uavhfl::db_to_linear(*t)).collect();
    let mut rows = Vec::new();
    let mut worst = [0.0f64; 3];
    for (pair, k) in pair_devices(cfg).into_iter().enumerate() {
        let u = assignment.serving_uav[k];
        for (slot, kind) in [LinkKind::Edge, LinkKind::Backhaul, LinkKind::Direct]
            .into_iter()
            .enumerate()
        {
            let index = if kind == LinkKind::Backhaul { u } else { k };
            let target = LinkTarget::from_deployment(&topology, &assignment, kind, index)?;
            let seed = derive_seed(cfg.seed, Stream::Trials, (3 * pair + slot) as u64);
            let empirical = empirical_success_curve(&scenario, target, &linear, cfg.trials, seed)?;
            for (theta_db, est) in cfg.theta_grid_db.iter().zip(&empirical) {
                let at = Scenario {
                    channel: scenario.channel.with_theta_db(*theta_db),
                    ..scenario
                };
                let analytic = match kind {
                    LinkKind::Edge => edge_success(
                        &at,
                        topology.edge_distance(k, u),
                        topology.devices[k].norm(),
                        topology.uavs[u].norm(),
                        &q,
                    )?,
                    LinkKind::Backhaul => backhaul_success(&at, topology.backhaul_distance(u), &q)?,
                    LinkKind::Direct => direct_success(&at, topology.direct_distance(k), &q)?,
                };
                worst[slot] = worst[slot].max((analytic - est.probability).abs());
                rows.push(ValidateRow {
                    theta_db: *theta_db,
                    pair,
                    link: kind,
                    device: k,
                    uav: u,
                    analytic,
                    empirical: est.probability,
                    ci_lo: est.ci_low,
                    ci_hi: est.ci_high,
                });
            }
        }
    }
    out.write("validate", &rows)?;
    eprintln!(
        "max |analytic - empirical|: edge {:.4}, backhaul {:.4}, direct {:.4}",
        worst[0], worst[1], worst[2]
    );
    Ok(())
}

#[derive(Serialize)]
struct HeightRow {
    height: f64,
    pair: usize,
    device: usize,
    uav: usize,
    edge: f64,
    backhaul: f64,
}

#[derive(Serialize)]
struct TargetRow {
    sweep_value: f64,
    seed: u64,
    variant: Variant,
    iterations_to_target: Option<usize>,
    latency_to_target: Option<f64>,
    final_accuracy: Option<f64>,
}

/// Trains the unbiased scheme to the accuracy target on a deployment
/// built by `make`, once per training seed.
fn iterations_sweep(
    cfg: &ExperimentConfig,
    values: &[f64],
    make: impl Fn(f64, u64) -> anyhow::Result<Deployment>,
) -> anyhow::Result<Vec<TargetRow>> {
    let variant = cfg.variant.unwrap_or(Variant::UnbiasedHfl);
    let mut rows = Vec::new();
    for seed in training_seeds(cfg) {
        let l = learning(cfg, seed)?;
        for &value in values {
            let dep = make(value, seed)?;
            let tc = TrainingConfig {
                seed,
                stop_at_accuracy: Some(cfg.accuracy_target),
                ..cfg.training(variant)
            };
            let trace = run(&dep, &l, &tc)?;
            rows.push(TargetRow {
                sweep_value: value,
                seed,
                variant,
                iterations_to_target: trace.iterations_to(cfg.accuracy_target),
                latency_to_target: trace.latency_to(cfg.accuracy_target),
                final_accuracy: trace.final_accuracy(),
            });
        }
    }
    Ok(rows)
}

pub fn sweep_height(cfg: &ExperimentConfig, out: &Output) -> anyhow::Result<()> {
    let topology = sample_topology(cfg.n_devices, cfg.n_uavs, cfg.radius, cfg.height, cfg.seed)?;
    let assignment = uavhfl::geometry::associate(&topology, &cfg.channel(), cfg.seed);
    let q = cfg.quadrature();
    let pairs: Vec<(usize, usize)> = pair_devices(cfg)
        .into_iter()
        .map(|k| (k, assignment.serving_uav[k]))
        .collect();
    let rows = cfg
        .height_grid
        .par_iter()
        .map(|&h| {
            let moved = topology.with_height(h)?;
            let scenario = Scenario::for_topology(&moved, cfg.channel(), cfg.resources());
            pairs
                .iter()
                .enumerate()
                .map(|(pair, &(k, u))| {
                    Ok(HeightRow {
                        height: h,
                        pair,
                        device: k,
                        uav: u,
                        edge: edge_success(
                            &scenario,
                            moved.edge_distance(k, u),
                            moved.devices[k].norm(),
                            moved.uavs[u].norm(),
                            &q,
                        )?,
                        backhaul: backhaul_success(&scenario, moved.backhaul_distance(u), &q)?,
                    })
                })
                .collect::<uavhfl::Result<Vec<_>>>()
        })
        .collect::<uavhfl::Result<Vec<_>>>()?;
    let rows: Vec<HeightRow> = rows.into_iter().flatten().collect();
    out.write("sweep_height", &rows)?;
    if cfg.sweep_training {
        let rows = iterations_sweep(cfg, &cfg.height_grid, |h, seed| {
            deployment_at(cfg, cfg.n_uavs, h, seed)
        })?;
        out.write("sweep_height_training", &rows)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct UavRow {
    n_uavs: usize,
    edge: f64,
    backhaul: f64,
    direct: f64,
}

pub fn sweep_uavs(cfg: &ExperimentConfig, out: &Output) -> anyhow::Result<()> {
    let max_uavs = cfg.uav_grid.iter().copied().max().unwrap_or(cfg.n_uavs);
    let mut rows = Vec::new();
    for &n in &cfg.uav_grid {
        let scenario = Scenario {
            area: cfg.area()?,
            channel: cfg.channel(),
            resources: cfg.resources(),
            n_devices: cfg.n_devices,
            n_uavs: n,
        };
        let avg = deployment_average(&scenario, max_uavs, cfg.n_deployments, cfg.seed, &cfg.quadrature())?;
        rows.push(UavRow {
            n_uavs: n,
            edge: avg.edge,
            backhaul: avg.backhaul,
            direct: avg.direct,
        });
    }
    out.write("sweep_uavs", &rows)?;
    if cfg.sweep_training {
        let values: Vec<f64> = cfg.uav_grid.iter().map(|n| *n as f64).collect();
        let rows = iterations_sweep(cfg, &values, |n, seed| deployment(cfg, n as usize, seed))?;
        out.write("sweep_uavs_training", &rows)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TraceCsvRow {
    variant: Variant,
    local_period: usize,
    global_period: usize,
    seed: u64,
    iteration: usize,
    accuracy: f64,
    loss: f64,
    train_loss: f64,
    edge_successes: usize,
    backhaul_successes: usize,
    direct_successes: usize,
    latency_s: f64,
}

#[derive(Serialize)]
struct SummaryRow {
    variant: Variant,
    local_period: usize,
    global_period: usize,
    seed: u64,
    iterations_to_target: Option<usize>,
    latency_to_target: Option<f64>,
    final_accuracy: Option<f64>,
}

pub fn train_cmd(cfg: &ExperimentConfig, out: &Output) -> anyhow::Result<()> {
    let variants: Vec<Variant> = match cfg.variant {
        Some(v) => vec![v],
        None => Variant::ALL.to_vec(),
    };
    let mut runs: Vec<(Variant, usize, usize)> = variants
        .iter()
        .map(|&v| (v, cfg.local_period, cfg.global_period))
        .collect();
    let grid_variant = cfg.variant.unwrap_or(Variant::UnbiasedHfl);
    for &[e, g] in &cfg.period_grid {
        if !runs.contains(&(grid_variant, e, g)) {
            runs.push((grid_variant, e, g));
        }
    }
    let mut traces = Vec::new();
    let mut summary = Vec::new();
    for seed in training_seeds(cfg) {
        let dep = deployment(cfg, cfg.n_uavs, seed)?;
        let l = learning(cfg, seed)?;
        for &(variant, e, g) in &runs {
            let tc = TrainingConfig {
                seed,
                local_period: e,
                global_period: g,
                ..cfg.training(variant)
            };
            let trace = run(&dep, &l, &tc)?;
            summary.push(SummaryRow {
                variant,
                local_period: e,
                global_period: g,
                seed,
                iterations_to_target: trace.iterations_to(cfg.accuracy_target),
                latency_to_target: trace.latency_to(cfg.accuracy_target),
                final_accuracy: trace.final_accuracy(),
            });
            traces.extend(trace.rows.iter().map(|r| TraceCsvRow {
                variant,
                local_period: e,
                global_period: g,
                seed,
                iteration: r.iteration,
                accuracy: r.accuracy,
                loss: r.loss,
                train_loss: r.train_loss,
                edge_successes: r.edge_successes,
                backhaul_successes: r.backhaul_successes,
                direct_successes: r.direct_successes,
                latency_s: r.latency,
            }));
        }
    }
    out.write("train", &traces)?;
    out.write("train_summary", &summary)?;
    Ok(())
}

#[derive(Serialize)]
struct BoundRow {
    form: &'static str,
    term: String,
    value: f64,
}

#[derive(Serialize)]
struct SurfaceRow {
    b2: f64,
    b3: f64,
    improvement: f64,
    condition: bool,
}

pub fn bound(cfg: &ExperimentConfig, out: &Output) -> anyhow::Result<()> {
    let dep = deployment(cfg, cfg.n_uavs, cfg.seed)?;
    let l = learning(cfg, cfg.seed)?;
    let clusters = dep.assignment.clusters();
    let p_k = l.partition.device_weights();
    let p_u = l.partition.cluster_weights(&clusters);
    let b = compute_b_terms(
        &dep.probabilities.edge,
        &dep.probabilities.backhaul,
        &p_k,
        &p_u,
        &clusters,
    )?;
    let total = l.partition.total() as f64;
    let inputs = cfg.bound_inputs(b, total);
    let mut rows = vec![
        BoundRow { form: "penalty", term: "B1".into(), value: b.b1 },
        BoundRow { form: "penalty", term: "B2".into(), value: b.b2 },
        BoundRow { form: "penalty", term: "B3".into(), value: b.b3 },
    ];
    let forms = [
        ("squared", convergence_bound_terms(&uavhfl::perf::BoundInputs { constants: ConstantTerms::Squared, ..inputs })?),
        ("linear", convergence_bound_terms(&uavhfl::perf::BoundInputs { constants: ConstantTerms::Linear, ..inputs })?),
        ("uniform", convergence_bound_uniform_terms(&inputs)?),
    ];
    for (form, breakdown) in forms {
        for t in &breakdown.terms {
            rows.push(BoundRow { form, term: t.name.clone(), value: t.value });
        }
        rows.push(BoundRow { form, term: "total".into(), value: breakdown.total() });
    }
    out.write("bound", &rows)?;

    let q = max_local_scaling(cfg.improvement_l, cfg.improvement_m, cfg.n_uavs, total)?;
    let surface = improvement_surface(&inputs, &cfg.b_grid, &cfg.b_grid, cfg.improvement_l, q, cfg.improvement_m)?;
    let rows: Vec<SurfaceRow> = surface
        .into_iter()
        .map(|p| SurfaceRow {
            b2: p.b2,
            b3: p.b3,
            improvement: p.improvement,
            condition: p.condition,
        })
        .collect();
    out.write("bound_surface", &rows)?;
    Ok(())
}

#[derive(Serialize)]
struct LatencyRow {
    variant: Variant,
    global_period: usize,
    model_bits: f64,
    seed: u64,
    iterations_to_target: Option<usize>,
    latency_to_target: Option<f64>,
}

pub fn latency(cfg: &ExperimentConfig, out: &Output) -> anyhow::Result<()> {
    let variants: Vec<Variant> = match cfg.variant {
        Some(v) => vec![v],
        None => vec![Variant::UnbiasedHfl, Variant::ConventionalHfl],
    };
    let mut rows = Vec::new();
    for seed in training_seeds(cfg) {
        let dep = deployment(cfg, cfg.n_uavs, seed)?;
        let l = learning(cfg, seed)?;
        for &variant in &variants {
            for &g in &cfg.latency_global_periods {
                for &bits in &cfg.model_bits_grid {
                    let mut tc = TrainingConfig {
                        seed,
                        global_period: g,
                        stop_at_accuracy: Some(cfg.accuracy_target),
                        ..cfg.training(variant)
                    };
                    tc.latency.model_bits = Some(bits);
                    let trace = run(&dep, &l, &tc)?;
                    rows.push(LatencyRow {
                        variant,
                        global_period: g,
                        model_bits: bits,
                        seed,
                        iterations_to_target: trace.iterations_to(cfg.accuracy_target),
                        latency_to_target: trace.latency_to(cfg.accuracy_target),
                    });
                }
            }
        }
    }
    out.write("latency", &rows)?;
    Ok(())
}
