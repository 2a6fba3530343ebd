use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// Written as `manifest.json` next to every run's outputs. Together with the
/// input files it names, it is enough to repeat the run; only the
/// timestamps and timing fields in the outputs will differ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub seed: u64,
    /// Input files the run read: config, dataset, model, rules, scenario.
    pub config_paths: Vec<PathBuf>,
    /// Settings after merging flags and `--config`.
    pub config: Value,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

impl RunManifest {
    pub fn new(command: &str, argv: &[String], seed: u64, paths: Vec<PathBuf>, config: Value, started_at: DateTime<Utc>) -> RunManifest {
        RunManifest {
            tool: "molgen".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            argv: argv.to_vec(),
            seed,
            config_paths: paths,
            config,
            started_at,
            finished_at: Utc::now(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        crate::write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<RunManifest, CliError> {
        let text = std::fs::read_to_string(path).map_err(crate::data_err)?;
        serde_json::from_str(&text).map_err(crate::data_err)
    }
}
