use std::path::Path;

use super::{require, HarnessError, Result};
use crate::dataio::{read_dump, ActivationRecord, Dataset};
use crate::netengine::NetworkParams;
use crate::supervisors::Sample;

/// A dump as found on disk: raw inputs (no logit columns) or activations
/// exported by some other model.
#[derive(Debug, Clone, PartialEq)]
pub enum Loaded {
    Raw(Dataset),
    Activations(Vec<ActivationRecord>),
}

pub fn load_dump(path: &Path) -> Result<Loaded> {
    require(path)?;
    let records = read_dump(path).map_err(|source| HarnessError::Input {
        path: path.to_path_buf(),
        source,
    })?;
    if records.first().map_or(true, |r| r.logits.is_empty()) {
        let data = Dataset::from_records(&records).map_err(|source| HarnessError::Input {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Loaded::Raw(data))
    } else {
        Ok(Loaded::Activations(records))
    }
}

impl Loaded {
    pub fn len(&self) -> usize {
        match self {
            Self::Raw(d) => d.len(),
            Self::Activations(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_raw(&self) -> bool {
        matches!(self, Self::Raw(_))
    }

    /// Activation records, running raw inputs through `params`.
    pub fn records(&self, params: Option<&NetworkParams>) -> Result<Vec<ActivationRecord>> {
        match (self, params) {
            (Self::Raw(d), Some(p)) => Ok(d.activations(p)?),
            (Self::Raw(_), None) => Err(HarnessError::Usage(
                "raw input dumps need a --checkpoint to produce activations".into(),
            )),
            (Self::Activations(r), p) => {
                if let (Some(p), Some(first)) = (p, r.first()) {
                    if first.logits.len() != p.num_classes() {
                        return Err(HarnessError::Usage(format!(
                            "dump has {} logits but the checkpoint has {} classes",
                            first.logits.len(),
                            p.num_classes()
                        )));
                    }
                }
                Ok(r.clone())
            }
        }
    }

    /// Scorable samples; raw dumps keep their inputs so ODIN can perturb them.
    pub fn samples(&self, params: Option<&NetworkParams>) -> Result<Vec<Sample>> {
        let records = self.records(params)?;
        Ok(match self {
            Self::Raw(d) => records
                .into_iter()
                .zip(&d.inputs)
                .map(|(record, x)| Sample {
                    record,
                    input: Some(x.clone()),
                })
                .collect(),
            Self::Activations(_) => records.into_iter().map(Sample::from_record).collect(),
        })
    }
}

/// Fraction of labeled samples predicted correctly.
pub(crate) fn labeled_accuracy(samples: &[Sample]) -> Option<f64> {
    let labeled: Vec<&Sample> = samples
        .iter()
        .filter(|s| s.record.class_label().is_some())
        .collect();
    if labeled.is_empty() {
        return None;
    }
    let correct = labeled.iter().filter(|s| s.record.is_correct()).count();
    Some(correct as f64 / labeled.len() as f64)
}
