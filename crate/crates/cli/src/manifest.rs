use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ebp_core::io::{write_json, SCHEMA_VERSION};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{CliResult, Command};

/// Provenance record written beside every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    /// Full argument vector; replaying it reproduces the outputs.
    pub argv: Vec<String>,
    /// Every option after defaults are applied.
    pub config: Value,
    pub seed: Option<u64>,
    pub library_version: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub outputs: Vec<PathBuf>,
    /// Command-specific results, e.g. the cross-validated `c`.
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// `data.json` -> `data.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    output.with_extension("manifest.json")
}

impl RunManifest {
    pub fn start(command: &Command, argv: &[String]) -> Self {
        let seed = match command {
            Command::Simulate(a) => Some(a.seed),
            Command::Fit(a) => Some(a.seed),
            Command::Bench(a) => Some(a.seed),
            Command::Directions(a) => Some(a.seed),
            Command::Evaluate(_) => None,
        };
        Self {
            version: SCHEMA_VERSION.to_string(),
            command: command.name().to_string(),
            argv: argv.to_vec(),
            config: serde_json::to_value(command).unwrap_or(Value::Null),
            seed,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_ms: now_ms(),
            finished_unix_ms: 0,
            outputs: Vec::new(),
            details: Value::Null,
        }
    }

    pub fn finish(&mut self, path: &Path) -> CliResult<()> {
        self.finished_unix_ms = now_ms();
        write_json(path, self)?;
        log::info!("wrote {}", path.display());
        Ok(())
    }
}
