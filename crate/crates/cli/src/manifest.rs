use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::error::CliError;
use crate::io;

/// Record of one invocation: enough to rerun it and get the same outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub threads: usize,
    pub duration_ms: f64,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub summary: serde_json::Value,
}

pub struct ManifestBuilder {
    started: Instant,
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn new(subcommand: &str) -> Self {
        Self {
            started: Instant::now(),
            manifest: RunManifest {
                subcommand: subcommand.to_owned(),
                tool_version: env!("CARGO_PKG_VERSION").to_owned(),
                seed: None,
                config: serde_json::Value::Null,
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                threads: rayon::current_num_threads(),
                duration_ms: 0.0,
                summary: serde_json::Value::Null,
            },
        }
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.manifest.seed = Some(seed);
        self
    }

    pub fn config<T: Serialize>(&mut self, config: &T) -> &mut Self {
        self.manifest.config = serde_json::to_value(config).expect("configs serialize");
        self
    }

    pub fn input(&mut self, key: &str, path: &Path) -> &mut Self {
        self.manifest.inputs.insert(key.to_owned(), path.display().to_string());
        self
    }

    pub fn output(&mut self, key: &str, path: &Path) -> &mut Self {
        self.manifest.outputs.insert(key.to_owned(), path.display().to_string());
        self
    }

    pub fn summary<T: Serialize>(&mut self, summary: &T) -> &mut Self {
        self.manifest.summary = serde_json::to_value(summary).expect("summaries serialize");
        self
    }

    fn finish(&mut self) -> &RunManifest {
        self.manifest.duration_ms = self.started.elapsed().as_secs_f64() * 1e3;
        &self.manifest
    }

    /// Writes the manifest next to `primary`.
    pub fn write_next_to(&mut self, primary: &Path) -> Result<(), CliError> {
        let path = io::manifest_path(primary);
        io::write_json(&path, self.finish())
    }

    /// For commands whose primary output is stdout: writes to `path` when
    /// given, otherwise prints a single `manifest: {...}` line on stderr.
    pub fn emit(&mut self, path: Option<&Path>) -> Result<(), CliError> {
        match path {
            Some(p) => io::write_json(p, self.finish()),
            None => {
                let line = serde_json::to_string(self.finish()).expect("manifest serializes");
                eprintln!("manifest: {line}");
                Ok(())
            }
        }
    }
}
