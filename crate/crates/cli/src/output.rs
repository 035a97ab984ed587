//! Artifact staging: every output is built in memory, then all files are
//! moved into place together, followed by the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use tempfile::NamedTempFile;

use crate::CliError;

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config: &'a Value,
    seed: Option<u64>,
    version: &'static str,
    outputs: Vec<String>,
    duration_seconds: f64,
    results: &'a Value,
}

pub struct Run {
    command: &'static str,
    started: Instant,
    files: Vec<(PathBuf, Vec<u8>)>,
    pub config: Value,
    pub seed: Option<u64>,
    pub results: Value,
}

impl Run {
    pub fn new(command: &'static str) -> Self {
        Run { command, started: Instant::now(), files: Vec::new(), config: Value::Null, seed: None, results: Value::Null }
    }

    pub fn add(&mut self, path: &Path, bytes: Vec<u8>) {
        self.files.push((path.to_path_buf(), bytes));
    }

    /// Write every staged file atomically, then `<first output>.manifest.json`.
    pub fn commit(self) -> Result<(), CliError> {
        let Some(primary) = self.files.first().map(|f| f.0.clone()) else {
            return Ok(());
        };
        let manifest = RunManifest {
            command: self.command,
            config: &self.config,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION"),
            outputs: self.files.iter().map(|f| f.0.display().to_string()).collect(),
            duration_seconds: self.started.elapsed().as_secs_f64(),
            results: &self.results,
        };
        let mut manifest_path = primary.into_os_string();
        manifest_path.push(".manifest.json");
        let mut body = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        body.push(b'\n');

        // stage everything first so a failure leaves no output behind
        let mut staged = Vec::new();
        for (path, bytes) in self.files.iter().map(|(p, b)| (p.clone(), b)).chain(std::iter::once((PathBuf::from(manifest_path), &body))) {
            staged.push((stage(&path, bytes)?, path));
        }
        for (tmp, path) in staged {
            tmp.persist(&path).map_err(|e| CliError::Io(format!("{}: {}", path.display(), e.error)))?;
        }
        Ok(())
    }
}

fn stage(path: &Path, bytes: &[u8]) -> Result<NamedTempFile, CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.flush().map_err(io)?;
    Ok(tmp)
}
