use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileHash {
    fn of(path: &Path, shown: String) -> Result<Self, CliError> {
        Ok(Self {
            path: shown,
            sha256: sha256_file(path)?,
            bytes: fs::metadata(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub threads: usize,
    pub config: Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub stages: Vec<StageTime>,
}

/// Collects inputs, outputs and timings while a subcommand runs.
#[derive(Debug)]
pub struct Recorder {
    command: String,
    root: Option<PathBuf>,
    config: Value,
    seeds: BTreeMap<String, u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    stages: Vec<StageTime>,
}

impl Recorder {
    /// Output paths under `root` are listed relative to it.
    pub fn new(command: &str, root: Option<&Path>) -> Self {
        Self {
            command: command.to_string(),
            root: root.map(Path::to_path_buf),
            config: Value::Null,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            stages: Vec::new(),
        }
    }

    pub fn config(&mut self, config: Value) {
        self.config = config;
    }

    pub fn seed(&mut self, name: &str, seed: u64) {
        self.seeds.insert(name.to_string(), seed);
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn stage(&mut self, stage: &str, seconds: f64) {
        self.stages.push(StageTime {
            stage: stage.to_string(),
            seconds,
        });
    }

    fn shown(&self, path: &Path) -> String {
        self.root
            .as_deref()
            .and_then(|r| path.strip_prefix(r).ok())
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }

    fn hashes(&self, paths: &[PathBuf]) -> Result<Vec<FileHash>, CliError> {
        let mut out: Vec<FileHash> = paths
            .iter()
            .map(|p| FileHash::of(p, self.shown(p)))
            .collect::<Result<_, _>>()?;
        out.sort_by(|a, b| a.path.cmp(&b.path));
        out.dedup_by(|a, b| a.path == b.path);
        Ok(out)
    }

    pub fn finish(&self) -> Result<RunManifest, CliError> {
        Ok(RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command.clone(),
            threads: rayon::current_num_threads(),
            config: self.config.clone(),
            seeds: self.seeds.clone(),
            inputs: self.hashes(&self.inputs)?,
            outputs: self.hashes(&self.outputs)?,
            stages: self.stages.clone(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<RunManifest, CliError> {
        let manifest = self.finish()?;
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(manifest)
    }
}
