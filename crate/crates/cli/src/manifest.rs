//! `manifest.json`: what each subcommand wrote, under which config and seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::hex;

pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Complete,
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub status: Status,
    /// File name to SHA-256 of its bytes.
    pub artifacts: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    /// Keyed by subcommand.
    pub runs: BTreeMap<String, RunRecord>,
}

impl Manifest {
    /// The existing manifest in `dir` if it was written under the same config
    /// and seed; otherwise a fresh one, so stale artifacts are never reused.
    pub fn open(dir: &Path, config_hash: &str, seed: u64, inputs: BTreeMap<String, String>) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if path.is_file() {
            let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
            if let Ok(m) = serde_json::from_str::<Manifest>(&text) {
                if m.format_version == MANIFEST_VERSION && m.config_hash == config_hash && m.seed == seed {
                    return Ok(m);
                }
            }
        }
        Ok(Manifest {
            format_version: MANIFEST_VERSION,
            config_hash: config_hash.to_string(),
            seed,
            inputs,
            runs: BTreeMap::new(),
        })
    }

    /// Record a run. Files it rewrote no longer belong to earlier runs.
    pub fn record(&mut self, command: &str, run: RunRecord) {
        for (name, other) in self.runs.iter_mut() {
            if name != command {
                other.artifacts.retain(|a, _| !run.artifacts.contains_key(a));
            }
        }
        self.runs.insert(command.to_string(), run);
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
    }

    /// Path of `name` as written by a complete run, checked against its digest.
    pub fn artifact(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        let digest = self
            .runs
            .values()
            .filter(|r| r.status == Status::Complete)
            .find_map(|r| r.artifacts.get(name))
            .ok_or_else(|| anyhow!("{name} not produced by a complete run for this config and seed; run `train` or `select` first"))?;
        let path = dir.join(name);
        let bytes = std::fs::read(&path).with_context(|| format!("cannot read {}", path.display()))?;
        if &hex(&Sha256::digest(&bytes)) != digest {
            bail!("{} changed since it was written", path.display());
        }
        Ok(path)
    }
}

/// Artifacts written by one subcommand.
pub struct Recorder {
    dir: PathBuf,
    pub artifacts: BTreeMap<String, String>,
}

impl Recorder {
    pub fn new(dir: &Path) -> Self {
        Recorder {
            dir: dir.to_path_buf(),
            artifacts: BTreeMap::new(),
        }
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let bytes = bytes.as_ref();
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.artifacts.insert(name.to_string(), hex(&Sha256::digest(bytes)));
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, serde_json::to_string_pretty(value)? + "\n")
    }
}
