//! Activation-dump interchange format and synthetic datasets.
//!
//! A dump holds one [`ActivationRecord`] per sample. Dumps written by an
//! external exporter carry logits (and optionally penultimate features).
//! Raw desk-scale datasets use the same container with zero logit columns
//! and the input vector stored in the feature slot; see [`Dataset`].

mod dump;
mod synth;

pub use dump::{
    decode_dump, encode_dump, read_dump, write_dump, DumpHeader, DUMP_HEADER_LEN, DUMP_MAGIC,
    DUMP_VERSION, FLAG_FEATURES, FLAG_LABELS,
};
pub use synth::{gen_blobs, gen_noise, gen_shifted, SyntheticKind, SyntheticSpec};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netengine::{argmax, Labeled, NetworkParams};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dump format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Net(#[from] crate::netengine::NetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// One sample's activations. `label` is -1 for unlabeled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationRecord {
    pub label: i32,
    pub logits: Vec<f64>,
    pub features: Option<Vec<f64>>,
}

impl ActivationRecord {
    pub fn new(label: i32, logits: Vec<f64>, features: Option<Vec<f64>>) -> Self {
        Self {
            label,
            logits,
            features,
        }
    }

    /// Argmax of the logits, first index on ties; `None` without logits.
    pub fn predicted(&self) -> Option<usize> {
        argmax(&self.logits)
    }

    pub fn class_label(&self) -> Option<usize> {
        usize::try_from(self.label).ok()
    }

    /// Labeled and predicted correctly.
    pub fn is_correct(&self) -> bool {
        self.class_label().is_some() && self.class_label() == self.predicted()
    }
}

/// Raw input vectors with optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn labeled(&self) -> Option<Labeled<'_>> {
        self.labels
            .as_deref()
            .map(|labels| Labeled::new(&self.inputs, labels))
    }

    pub fn unlabeled(mut self) -> Self {
        self.labels = None;
        self
    }

    /// Records with no logits and the input stored as features.
    pub fn to_records(&self) -> Vec<ActivationRecord> {
        self.inputs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let label = self.labels.as_ref().map_or(-1, |l| l[i] as i32);
                ActivationRecord::new(label, Vec::new(), Some(x.clone()))
            })
            .collect()
    }

    /// Inverse of [`Dataset::to_records`]. Labels are kept only if every
    /// record carries one.
    pub fn from_records(records: &[ActivationRecord]) -> Result<Self> {
        let mut inputs = Vec::with_capacity(records.len());
        let mut labels = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if !r.logits.is_empty() {
                return Err(DataError::Invalid(format!(
                    "record {i} carries logits; expected a raw input dump"
                )));
            }
            let x = r.features.as_ref().ok_or_else(|| {
                DataError::Invalid(format!("record {i} has no input features"))
            })?;
            inputs.push(x.clone());
            labels.push(r.class_label());
        }
        let labels = labels.into_iter().collect::<Option<Vec<usize>>>();
        Ok(Self { inputs, labels })
    }

    /// Runs every input through the network, keeping penultimate activations
    /// as features.
    pub fn activations(&self, params: &NetworkParams) -> Result<Vec<ActivationRecord>> {
        self.inputs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let (logits, pen) = params.activations(x)?;
                let label = self.labels.as_ref().map_or(-1, |l| l[i] as i32);
                Ok(ActivationRecord::new(label, logits, Some(pen)))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Inlier,
    Outlier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic { spec: SyntheticSpec },
    ExternalDump { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub kind: DatasetKind,
    pub source: DatasetSource,
    pub seed: Option<u64>,
    pub count: usize,
}
