//! Anomaly-score producers wrapped around a classifier.
//!
//! Every supervisor turns a sample into a score `1 - max_j P_j`, where `P` is
//! a softmax over some activation vector; higher is more anomalous.

mod baseline;
mod grid;
mod odin;
mod openmax;
mod weibull;

pub use baseline::baseline_anomaly;
pub use grid::{
    grid_search, grid_search_odin, grid_search_openmax, select_best, GridContext, GridResult,
    GridRow, Grids, OdinGrid, OpenMaxGrid,
};
pub use odin::{odin_anomaly, odin_direction, OdinConfig};
pub use openmax::{
    mean_activation, openmax_fit, revise_activations, ActivationLayer, ClassModel, DistanceKind,
    OpenMaxConfig, OpenMaxModel, RevisedActivations,
};
pub use weibull::{weibull_cdf, weibull_fit_tail, WeibullModel};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::ActivationRecord;
use crate::netengine::{softmax_stable, NetError, NetworkParams};

#[derive(Debug, Error)]
pub enum SupervisorError {
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("degenerate Weibull fit: {0}")]
    DegenerateFit(String),
    #[error("Weibull fit did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("class {class}: {message}")]
    ClassFit { class: usize, message: String },
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("empty grid")]
    EmptyGrid,
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
}

pub type Result<T> = std::result::Result<T, SupervisorError>;

/// Finite anomaly score; larger is more anomalous.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AnomalyScore(f64);

impl AnomalyScore {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(Self(value))
        } else {
            Err(SupervisorError::Net(NetError::Numeric(format!(
                "non-finite anomaly score {value}"
            ))))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `1 - max_j softmax(v / T)_j`.
pub(crate) fn max_softmax_anomaly(v: &[f64], temperature: f64) -> Result<AnomalyScore> {
    let p = softmax_stable(v, temperature)?;
    AnomalyScore::new(1.0 - p.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupervisorKind {
    Baseline,
    Odin,
    OpenMax,
}

impl SupervisorKind {
    pub const ALL: [SupervisorKind; 3] = [Self::Baseline, Self::Odin, Self::OpenMax];

    pub fn name(self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::Odin => "odin",
            Self::OpenMax => "openmax",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl std::fmt::Display for SupervisorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Supervisor kind plus its parameters; one per model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "supervisor", content = "config", rename_all = "snake_case")]
pub enum SupervisorConfig {
    Baseline,
    Odin(OdinConfig),
    #[serde(rename = "openmax")]
    OpenMax(OpenMaxConfig),
}

impl SupervisorConfig {
    pub fn kind(&self) -> SupervisorKind {
        match self {
            Self::Baseline => SupervisorKind::Baseline,
            Self::Odin(_) => SupervisorKind::Odin,
            Self::OpenMax(_) => SupervisorKind::OpenMax,
        }
    }

    /// The parameters alone, as JSON (`{}` for baseline).
    pub fn params_json(&self) -> serde_json::Value {
        match self {
            Self::Baseline => serde_json::json!({}),
            Self::Odin(c) => serde_json::to_value(c).expect("plain struct"),
            Self::OpenMax(c) => serde_json::to_value(c).expect("plain struct"),
        }
    }
}

/// A sample's activations, plus its raw input when available.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub record: ActivationRecord,
    pub input: Option<Vec<f64>>,
}

impl Sample {
    pub fn from_record(record: ActivationRecord) -> Self {
        Self {
            record,
            input: None,
        }
    }
}

/// A configured supervisor ready to score samples.
#[derive(Debug, Clone, Copy)]
pub enum Supervisor<'a> {
    Baseline,
    Odin {
        params: &'a NetworkParams,
        config: OdinConfig,
    },
    OpenMax(&'a OpenMaxModel),
}

impl Supervisor<'_> {
    pub fn kind(&self) -> SupervisorKind {
        match self {
            Self::Baseline => SupervisorKind::Baseline,
            Self::Odin { .. } => SupervisorKind::Odin,
            Self::OpenMax(_) => SupervisorKind::OpenMax,
        }
    }

    pub fn config(&self) -> SupervisorConfig {
        match self {
            Self::Baseline => SupervisorConfig::Baseline,
            Self::Odin { config, .. } => SupervisorConfig::Odin(*config),
            Self::OpenMax(m) => SupervisorConfig::OpenMax(m.config),
        }
    }

    pub fn score(&self, sample: &Sample) -> Result<AnomalyScore> {
        match self {
            Self::Baseline => baseline_anomaly(&sample.record.logits),
            Self::Odin { params, config } => {
                let x = sample.input.as_deref().ok_or_else(|| {
                    SupervisorError::MissingInput(
                        "ODIN needs raw inputs and network parameters; \
                         activation dumps support baseline and openmax only"
                            .into(),
                    )
                })?;
                odin_anomaly(params, x, *config)
            }
            Self::OpenMax(model) => model.anomaly(&sample.record),
        }
    }
}
