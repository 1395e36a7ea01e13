use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::policy::Policy;
use super::train::Algorithm;
use super::MarlError;
use crate::num::Scalar;

pub const CHECKPOINT_FORMAT: &str = "evmarl-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Saved controller. Floats are written in shortest round-trip form, so a
/// load reproduces every parameter bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Checkpoint<F> {
    pub format: String,
    pub version: u32,
    pub scalar: String,
    pub algorithm: Algorithm,
    pub n_chargers: usize,
    /// Free-form variant name used to group runs in reports, e.g. `lstm-maddpg-dense`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub policy: Policy<F>,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
    scalar: String,
}

impl<F: Scalar> Checkpoint<F> {
    pub fn new(algorithm: Algorithm, n_chargers: usize, policy: Policy<F>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            scalar: F::NAME.into(),
            algorithm,
            n_chargers,
            label: None,
            policy,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// The label, or the algorithm name when none was set.
    pub fn variant(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.algorithm.name().to_string())
    }

    pub fn to_json(&self) -> Result<String, MarlError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, MarlError> {
        let h: Header = serde_json::from_str(s).map_err(|e| MarlError::Checkpoint(format!("unreadable header: {e}")))?;
        if h.format != CHECKPOINT_FORMAT {
            return Err(MarlError::Checkpoint(format!("not a checkpoint (format {:?})", h.format)));
        }
        if h.version != CHECKPOINT_VERSION {
            return Err(MarlError::Checkpoint(format!("unsupported version {}", h.version)));
        }
        if h.scalar != F::NAME {
            return Err(MarlError::Checkpoint(format!("stored as {}, loading as {}", h.scalar, F::NAME)));
        }
        let ck: Self = serde_json::from_str(s).map_err(|e| MarlError::Checkpoint(e.to_string()))?;
        if let Some(k) = ck.policy.n_agents() {
            if k != ck.n_chargers {
                return Err(MarlError::Checkpoint(format!(
                    "policy has {k} agents but header says {}",
                    ck.n_chargers
                )));
            }
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<(), MarlError> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, MarlError> {
        let s = fs::read_to_string(path).map_err(|e| MarlError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), MarlError> {
    let io = |e: std::io::Error| MarlError::Io(format!("{}: {e}", path.display()));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    fs::rename(&tmp, path).map_err(io)
}
