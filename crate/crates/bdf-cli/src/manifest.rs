//! Run manifest written next to every output set.

use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub version: String,
    pub wall_clock_s: f64,
    /// resident set high-water mark, when the platform reports one
    pub peak_memory_kib: Option<u64>,
}

pub struct ManifestBuilder {
    start: Instant,
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn new(subcommand: &str, config: serde_json::Value) -> Self {
        Self {
            start: Instant::now(),
            manifest: RunManifest {
                subcommand: subcommand.into(),
                config,
                inputs: Vec::new(),
                outputs: Vec::new(),
                version: env!("CARGO_PKG_VERSION").into(),
                wall_clock_s: 0.0,
                peak_memory_kib: None,
            },
        }
    }

    pub fn input(&mut self, p: &Path) {
        self.manifest.inputs.push(p.to_path_buf());
    }

    pub fn output(&mut self, p: &Path) {
        self.manifest.outputs.push(p.to_path_buf());
    }

    /// Write `manifest.json` into `dir`; the manifest lists itself last.
    pub fn finish(mut self, dir: &Path) -> std::io::Result<RunManifest> {
        let path = dir.join("manifest.json");
        self.manifest.outputs.push(path.clone());
        self.manifest.wall_clock_s = self.start.elapsed().as_secs_f64();
        self.manifest.peak_memory_kib = peak_memory_kib();
        std::fs::write(&path, serde_json::to_string_pretty(&self.manifest)?)?;
        Ok(self.manifest)
    }
}

fn peak_memory_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}
