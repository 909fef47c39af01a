use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::dataio::DataError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub runs: Vec<ManifestRun>,
}

/// One command invocation; artifact paths are relative to the output dir.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub command: String,
    pub seed: u64,
    pub artifacts: Vec<String>,
}

impl Manifest {
    pub fn load_or_default(path: &Path) -> Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| HarnessError::Input {
                path: path.to_path_buf(),
                source: DataError::Invalid(format!("manifest: {e}")),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(HarnessError::Input {
                path: path.to_path_buf(),
                source: e.into(),
            }),
        }
    }
}
