use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;
pub const SEED_ENV: &str = "SSC_SEED";

/// Everything needed to rerun a command.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub command: String,
    pub parameters: Map<String, Value>,
    pub seed: u64,
    pub artifact_paths: Vec<String>,
    pub wall_time_s: f64,
}

pub struct Recorder {
    command: &'static str,
    seed: u64,
    parameters: Map<String, Value>,
    artifacts: Vec<String>,
    started: Instant,
}

impl Recorder {
    pub fn new(command: &'static str, seed: u64) -> Self {
        Self { command, seed, parameters: Map::new(), artifacts: Vec::new(), started: Instant::now() }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.parameters.insert(key.to_owned(), v);
        self
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.display().to_string());
    }

    pub fn finish(mut self, path: &Path) -> Result<(), CliError> {
        self.artifact(path);
        let manifest = RunManifest {
            format_version: FORMAT_VERSION,
            command: self.command.to_owned(),
            parameters: self.parameters,
            seed: self.seed,
            artifact_paths: self.artifacts,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        write_json(path, &manifest)
    }
}

/// `SSC_SEED` wins over the flag when set.
pub fn resolve_seed(flag: u64) -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(flag),
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().map_or_else(|| PathBuf::from(name), |p| p.join(name))
}
