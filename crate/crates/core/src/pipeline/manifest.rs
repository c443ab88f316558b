use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{read_to_string, write_atomic};

pub const MANIFEST_FILE: &str = "manifest.json";

pub(crate) fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub started: u64,
    pub finished: u64,
    /// Paths relative to the output directory.
    pub outputs: Vec<PathBuf>,
}

/// Record of every stage run into one output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub seed: u64,
    /// Unix seconds.
    pub created: u64,
    pub updated: u64,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn new(config_hash: String, seed: u64) -> Self {
        let now = unix_now();
        RunManifest {
            config_hash,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            created: now,
            updated: now,
            stages: Vec::new(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_to_string(path)?).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
    }

    /// The manifest in `dir` if it belongs to the same configuration,
    /// otherwise a fresh one.
    pub fn open(dir: &Path, config_hash: &str, seed: u64) -> Self {
        match Self::read(&dir.join(MANIFEST_FILE)) {
            Ok(m) if m.config_hash == config_hash && m.seed == seed => m,
            _ => RunManifest::new(config_hash.to_string(), seed),
        }
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    /// Inserts or replaces the record of `record.name`.
    pub fn record(&mut self, record: StageRecord) {
        self.updated = record.finished;
        match self.stages.iter_mut().find(|s| s.name == record.name) {
            Some(s) => *s = record,
            None => self.stages.push(record),
        }
    }

    pub fn outputs(&self) -> impl Iterator<Item = &PathBuf> {
        self.stages.iter().flat_map(|s| &s.outputs)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join(MANIFEST_FILE), serde_json::to_string_pretty(self)?.as_bytes())
    }
}
