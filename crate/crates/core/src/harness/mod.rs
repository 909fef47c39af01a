//! Command implementations behind the `oodbench` CLI.
//!
//! Every command writes under one output directory and appends the files it
//! produced to `manifest.json` there.

pub mod cli;
mod commands;
mod inputs;
mod manifest;
mod sweep;

pub use commands::{
    cmd_evaluate, cmd_gen, cmd_gridsearch, cmd_train, EvaluateOpts, GenKind, GenOpts, GridOpts,
    TrainOpts,
};
pub use inputs::{load_dump, Loaded};
pub use manifest::{Manifest, ManifestRun};
pub use sweep::{cmd_sweep, SweepOpts, SweepRow, SWEEP_HEADER};

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dataio::DataError;
use crate::metrics::MetricsError;
use crate::netengine::NetError;
use crate::supervisors::SupervisorError;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("cannot write {}: {source}", path.display())]
    Output { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: DataError },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Supervisor(#[from] SupervisorError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{failed} of {total} sweep cells failed (rows marked NA)")]
    PartialFailure { failed: usize, total: usize },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::MissingInput(_) | Self::Output { .. } => EXIT_USAGE,
            _ => EXIT_DATA,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Output directory, seed, and the artifacts written so far in this run.
#[derive(Debug)]
pub struct RunContext {
    pub out: PathBuf,
    pub seed: u64,
    artifacts: Vec<String>,
}

impl RunContext {
    /// Creates the output directory if needed.
    pub fn new(out: impl Into<PathBuf>, seed: u64) -> Result<Self> {
        let out = out.into();
        std::fs::create_dir_all(&out).map_err(|source| HarnessError::Output {
            path: out.clone(),
            source,
        })?;
        Ok(Self {
            out,
            seed,
            artifacts: Vec::new(),
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    /// Writes `bytes` to `rel` under the output directory.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|source| HarnessError::Output {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        std::fs::write(&path, bytes).map_err(|source| HarnessError::Output {
            path: path.clone(),
            source,
        })?;
        if !self.artifacts.iter().any(|a| a == rel) {
            self.artifacts.push(rel.to_string());
        }
        Ok(path)
    }

    pub fn artifacts(&self) -> &[String] {
        &self.artifacts
    }

    /// Appends this run to `manifest.json`.
    pub fn finish(&mut self, command: &str) -> Result<()> {
        let path = self.path(manifest::MANIFEST_FILE);
        let mut m = Manifest::load_or_default(&path)?;
        m.runs.push(ManifestRun {
            command: command.to_string(),
            seed: self.seed,
            artifacts: self.artifacts.clone(),
        });
        let text = serde_json::to_string_pretty(&m).expect("plain struct") + "\n";
        std::fs::write(&path, text).map_err(|source| HarnessError::Output { path, source })
    }
}

pub(crate) fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(HarnessError::MissingInput(path.to_path_buf()))
    }
}

/// Fixed-width text table; floats at 4 decimals.
pub(crate) fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

pub(crate) fn f4(v: f64) -> String {
    format!("{v:.4}")
}
