//! CSV artifacts with a metadata sidecar, written atomically.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    command: &'a str,
    file: &'a str,
    rows: usize,
    seed: u64,
    config_sha256: String,
    package: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

/// Destination directory and provenance shared by all files of one run.
pub struct Output<'a> {
    pub dir: PathBuf,
    pub command: &'a str,
    pub config: &'a ExperimentConfig,
}

impl Output<'_> {
    /// Writes `rows` to `<dir>/<name>.csv` with a header row, then the
    /// sidecar `<name>.csv.meta.json`. Returns the CSV path.
    pub fn write<T: Serialize>(&self, name: &str, rows: &[T]) -> anyhow::Result<PathBuf> {
        fs::create_dir_all(&self.dir)
            .with_context(|| format!("creating {}", self.dir.display()))?;
        let file = format!("{name}.csv");
        let path = self.dir.join(&file);
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
        write_atomic(&path, &bytes)?;
        let meta = Metadata {
            command: self.command,
            file: &file,
            rows: rows.len(),
            seed: self.config.seed,
            config_sha256: config_hash(self.config),
            package: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: self.config,
        };
        let mut text = serde_json::to_string_pretty(&meta)?;
        text.push('\n');
        write_atomic(&self.dir.join(format!("{file}.meta.json")), text.as_bytes())?;
        eprintln!("wrote {} ({} rows)", path.display(), rows.len());
        Ok(path)
    }
}
