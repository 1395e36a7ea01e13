use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::{DateTime, SecondsFormat, Utc};
use evmarl::marl::write_atomic;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmittedFile {
    pub path: String,
    pub sha256: String,
}

/// Provenance of one command invocation. `run_id` hashes the command, the
/// config snapshot and the seed, so rerunning from a manifest reproduces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: String,
    pub out_dir: PathBuf,
    /// Extra command inputs, e.g. the checkpoint an evaluation read.
    pub inputs: Vec<EmittedFile>,
    pub started: String,
    pub finished: String,
    pub files: Vec<EmittedFile>,
}

pub fn version_string() -> String {
    format!("evmarl {}", env!("CARGO_PKG_VERSION"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn stamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Collects output files as they are written.
pub struct Emitter {
    dir: PathBuf,
    started: DateTime<Utc>,
    files: Vec<EmittedFile>,
}

impl Emitter {
    pub fn new(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            started: Utc::now(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.files.push(EmittedFile {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn finish(self, command: &str, seed: u64, config: String, inputs: Vec<EmittedFile>) -> anyhow::Result<RunManifest> {
        let mut h = Sha256::new();
        for part in [command.as_bytes(), config.as_bytes(), &seed.to_le_bytes()] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part);
        }
        for f in &inputs {
            h.update(f.sha256.as_bytes());
        }
        let m = RunManifest {
            run_id: hex::encode(h.finalize())[..16].to_string(),
            command: command.to_string(),
            version: version_string(),
            seed,
            config,
            out_dir: self.dir.clone(),
            inputs,
            started: stamp(self.started),
            finished: stamp(Utc::now()),
            files: self.files,
        };
        write_atomic(&self.dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&m)?.as_bytes())?;
        Ok(m)
    }
}

pub fn input(path: &Path) -> anyhow::Result<EmittedFile> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(EmittedFile {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}
