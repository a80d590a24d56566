use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: &'static str,
    pub parameters: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub started_unix: u64,
    pub wall_seconds: f64,
    /// Per-phase timings, e.g. per prune cycle.
    pub timings: Value,
}

pub struct ManifestBuilder {
    command: &'static str,
    started: Instant,
    started_unix: u64,
    inputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn start(command: &'static str, inputs: &[&Path]) -> Self {
        Self {
            command,
            started: Instant::now(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
        }
    }

    pub fn finish(self, parameters: Value, outputs: Vec<PathBuf>, timings: Value, path: &Path) -> anyhow::Result<()> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            parameters,
            inputs: self.inputs,
            outputs,
            started_unix: self.started_unix,
            wall_seconds: self.started.elapsed().as_secs_f64(),
            timings,
        };
        std::fs::write(path, serde_json::to_string_pretty(&manifest)?)
            .with_context(|| format!("writing manifest {}", path.display()))
    }
}

/// `dir/name.ext` → `dir/name.manifest.json`.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    output.with_file_name(format!("{stem}.manifest.json"))
}
