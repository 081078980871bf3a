//! Datasets, the synthetic Gaussian-blob generator, the label-sorted shard
//! partitioner and a reader for idx-format image/label files.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::{rng_for, Stream};

/// Row-major feature matrix with integer labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    pub labels: Vec<usize>,
    pub dim: usize,
    pub classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, dim: usize, classes: usize) -> Result<Self> {
        if dim == 0 || features.len() != labels.len() * dim {
            return Err(Error::Dataset(format!(
                "{} features do not form {} rows of width {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Dataset(format!("label {bad} outside {classes} classes")));
        }
        Ok(Self {
            features,
            labels,
            dim,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

/// Balanced `classes`-way Gaussian mixture in `dim` dimensions.
///
/// Class means have i.i.d. N(0, separation²/dim) coordinates, so two means
/// lie about `separation·√2` apart; samples add unit-variance isotropic
/// noise. Labels cycle through the classes.
pub fn synthetic_blobs(
    n_samples: usize,
    dim: usize,
    classes: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_samples == 0 || dim == 0 || classes < 2 {
        return Err(Error::invalid("blobs need samples, a dimension and at least two classes"));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::invalid("separation must be non-negative"));
    }
    let mut rng = rng_for(seed, Stream::Dataset, 0);
    let scale = separation / (dim as f64).sqrt();
    let means: Vec<f64> = (0..classes * dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        })
        .collect::<Vec<f64>>();
    let mut features = Vec::with_capacity(n_samples * dim);
    let mut labels = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let c = i % classes;
        labels.push(c);
        for j in 0..dim {
            let noise: f64 = StandardNormal.sample(&mut rng);
            features.push(means[c * dim + j] + noise);
        }
    }
    Dataset::new(features, labels, dim, classes)
}

/// Per-device sample indices into a shared dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataPartition {
    pub indices: Vec<Vec<usize>>,
}

impl DataPartition {
    pub fn n_devices(&self) -> usize {
        self.indices.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.indices.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.indices.iter().map(Vec::len).sum()
    }

    /// `p_k = n_k / n̄`.
    pub fn device_weights(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.indices.iter().map(|s| s.len() as f64 / total).collect()
    }

    /// `p̄_u = n̄_u / n̄` for each cluster of device indices.
    pub fn cluster_weights(&self, clusters: &[Vec<usize>]) -> Vec<f64> {
        let p = self.device_weights();
        clusters
            .iter()
            .map(|members| members.iter().map(|&k| p[k]).sum())
            .collect()
    }
}

/// Label-sorted shard partition: samples are sorted by label (stably), cut
/// into `n_devices × labels_per_device` contiguous shards of near-equal size,
/// and each device receives `labels_per_device` randomly chosen shards.
pub fn partition_noniid<R: Rng + ?Sized>(
    dataset: &Dataset,
    n_devices: usize,
    labels_per_device: usize,
    rng: &mut R,
) -> Result<DataPartition> {
    if n_devices == 0 || labels_per_device == 0 {
        return Err(Error::invalid("device count and labels per device must be positive"));
    }
    if dataset.len() < n_devices {
        return Err(Error::invalid(format!(
            "{} samples cannot cover {n_devices} devices",
            dataset.len()
        )));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.sort_by_key(|&i| dataset.labels[i]);
    // Never cut more shards than there are samples.
    let n_shards = (n_devices * labels_per_device).min(dataset.len());
    let bounds: Vec<usize> = (0..=n_shards).map(|s| s * dataset.len() / n_shards).collect();
    let mut shard_ids: Vec<usize> = (0..n_shards).collect();
    shard_ids.shuffle(rng);
    let mut indices = vec![Vec::new(); n_devices];
    for (slot, &s) in shard_ids.iter().enumerate() {
        let device = slot % n_devices;
        indices[device].extend_from_slice(&order[bounds[s]..bounds[s + 1]]);
    }
    for shard in &mut indices {
        shard.sort_unstable();
    }
    Ok(DataPartition { indices })
}

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Dataset("truncated idx header".into()))
}

/// Parses idx image and label files (unsigned-byte payloads). Pixels are
/// scaled to [0, 1]; the class count is one more than the largest label.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let magic = be_u32(images, 0)?;
    if magic != IDX_IMAGES {
        return Err(Error::Dataset(format!("image magic {magic:#010x}, expected {IDX_IMAGES:#010x}")));
    }
    let magic = be_u32(labels, 0)?;
    if magic != IDX_LABELS {
        return Err(Error::Dataset(format!("label magic {magic:#010x}, expected {IDX_LABELS:#010x}")));
    }
    let n = be_u32(images, 4)? as usize;
    let rows = be_u32(images, 8)? as usize;
    let cols = be_u32(images, 12)? as usize;
    let n_labels = be_u32(labels, 4)? as usize;
    if n != n_labels {
        return Err(Error::Dataset(format!("{n} images but {n_labels} labels")));
    }
    let dim = rows * cols;
    let pixels = images
        .get(16..16 + n * dim)
        .ok_or_else(|| Error::Dataset("truncated image payload".into()))?;
    let raw_labels = labels
        .get(8..8 + n)
        .ok_or_else(|| Error::Dataset("truncated label payload".into()))?;
    let features = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let labels: Vec<usize> = raw_labels.iter().map(|&l| usize::from(l)).collect();
    let classes = labels.iter().copied().max().unwrap_or(0).max(1) + 1;
    Dataset::new(features, labels, dim, classes)
}

pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let read = |p: &Path| {
        std::fs::read(p).map_err(|e| Error::Dataset(format!("{}: {e}", p.display())))
    };
    parse_idx(&read(images)?, &read(labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn blobs_are_balanced_and_seeded() {
        let d = synthetic_blobs(1000, 8, 10, 4.0, 1).unwrap();
        assert_eq!(d.len(), 1000);
        for c in 0..10 {
            assert_eq!(d.labels.iter().filter(|&&l| l == c).count(), 100);
        }
        assert_eq!(d, synthetic_blobs(1000, 8, 10, 4.0, 1).unwrap());
    }

    #[test]
    fn two_shards_give_at_most_two_labels() {
        let d = synthetic_blobs(10_000, 4, 10, 4.0, 2).unwrap();
        let part = partition_noniid(&d, 50, 2, &mut rng_for(2, Stream::Partition, 0)).unwrap();
        assert_eq!(part.total(), d.len());
        for shard in &part.indices {
            let labels: BTreeSet<usize> = shard.iter().map(|&i| d.labels[i]).collect();
            assert!(labels.len() <= 2);
            assert_eq!(shard.len(), 200);
        }
        let mut all: Vec<usize> = part.indices.concat();
        all.sort_unstable();
        assert_eq!(all, (0..d.len()).collect::<Vec<_>>());
    }

    #[test]
    fn full_coverage_is_nearly_iid() {
        let d = synthetic_blobs(10_000, 4, 10, 4.0, 3).unwrap();
        let part = partition_noniid(&d, 50, 10, &mut rng_for(3, Stream::Partition, 0)).unwrap();
        let mean_labels: f64 = part
            .indices
            .iter()
            .map(|s| s.iter().map(|&i| d.labels[i]).collect::<BTreeSet<_>>().len() as f64)
            .sum::<f64>()
            / 50.0;
        assert!(mean_labels > 6.0, "{mean_labels}");
    }

    #[test]
    fn uneven_sizes_still_partition() {
        let d = synthetic_blobs(1003, 4, 10, 4.0, 4).unwrap();
        let part = partition_noniid(&d, 7, 3, &mut rng_for(4, Stream::Partition, 0)).unwrap();
        assert_eq!(part.total(), 1003);
        assert!(partition_noniid(&d, 2000, 1, &mut rng_for(4, Stream::Partition, 0)).is_err());
    }

    #[test]
    fn weights_sum_to_one() {
        let d = synthetic_blobs(1003, 4, 10, 4.0, 5).unwrap();
        let part = partition_noniid(&d, 7, 3, &mut rng_for(5, Stream::Partition, 0)).unwrap();
        let p = part.device_weights();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let clusters = vec![vec![0, 3], vec![1, 2, 4], vec![5, 6]];
        let pu = part.cluster_weights(&clusters);
        assert!((pu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (members, w) in clusters.iter().zip(&pu) {
            let inner: f64 = members.iter().map(|&k| p[k] / w).sum();
            assert!((inner - 1.0).abs() < 1e-12);
        }
    }

    fn idx_files(n: u32, rows: u32, cols: u32, pixels: &[u8], labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
        let mut img = Vec::new();
        for v in [IDX_IMAGES, n, rows, cols] {
            img.extend_from_slice(&v.to_be_bytes());
        }
        img.extend_from_slice(pixels);
        let mut lab = Vec::new();
        for v in [IDX_LABELS, n] {
            lab.extend_from_slice(&v.to_be_bytes());
        }
        lab.extend_from_slice(labels);
        (img, lab)
    }

    #[test]
    fn idx_round_trip() {
        let (img, lab) = idx_files(2, 2, 2, &[0, 255, 51, 102, 1, 2, 3, 4], &[3, 9]);
        let d = parse_idx(&img, &lab).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dim, 4);
        assert_eq!(d.classes, 10);
        assert_eq!(d.features(0), &[0.0, 1.0, 0.2, 0.4]);
        assert_eq!(d.labels, vec![3, 9]);
    }

    #[test]
    fn idx_rejects_bad_files() {
        let (img, lab) = idx_files(2, 2, 2, &[0; 8], &[0, 1]);
        assert!(parse_idx(&lab, &img).is_err());
        assert!(parse_idx(&img[..20], &lab).is_err());
        let (img3, _) = idx_files(3, 2, 2, &[0; 12], &[]);
        assert!(parse_idx(&img3, &lab).is_err());
    }
}
