//! Run manifest: everything needed to reproduce the tables of a run.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;
use crate::table::write_file;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub outputs: Vec<String>,
    pub wall_seconds: f64,
    pub summary: Value,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    /// Full configuration after defaults and overrides.
    pub config: Value,
    pub seed: u64,
    pub system_sha256: Option<String>,
    pub stages: Vec<StageRecord>,
    pub warnings: Vec<String>,
    pub status: String,
}

impl RunManifest {
    pub fn new(command: &str, config: Value, seed: u64, system_sha256: Option<String>) -> Self {
        Self {
            tool_version: TOOL_VERSION.into(),
            command: command.into(),
            config,
            seed,
            system_sha256,
            stages: Vec::new(),
            warnings: Vec::new(),
            status: "running".into(),
        }
    }

    /// Times `f` and records it as a stage; failures are recorded before
    /// being returned.
    pub fn stage<T>(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<String>) -> Result<(T, Value), CliError>,
    ) -> Result<T, CliError> {
        let start = Instant::now();
        let mut outputs = Vec::new();
        let result = f(&mut outputs);
        let wall_seconds = start.elapsed().as_secs_f64();
        let (summary, error, out) = match result {
            Ok((t, s)) => (s, None, Ok(t)),
            Err(e) => (Value::Null, Some(e.to_string()), Err(e)),
        };
        self.stages.push(StageRecord { name: name.into(), outputs, wall_seconds, summary, error });
        out
    }

    pub fn finish(&mut self, result: &Result<(), CliError>) {
        self.status = match result {
            Ok(()) => "ok".into(),
            Err(e) => format!("failed: {e}"),
        };
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_file(path, &(text + "\n"))
    }
}
