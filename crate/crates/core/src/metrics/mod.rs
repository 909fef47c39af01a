//! Threshold metrics over anomaly-scored inlier/outlier samples.
//!
//! A sample is accepted when its anomaly score is strictly below the
//! threshold. Rejected outliers are true positives, rejected inliers false
//! positives. Only thresholds that change the accepted set are considered:
//! samples sharing a score are always accepted or rejected together.

mod coverage;
mod report;
mod roc;

pub use coverage::{coverage_breakpoint, coverage_curve, CoveragePoint};
pub use report::{evaluate, score_samples, summarize, EvaluationReport, MetricSummary, COV10_ACCURACY};
pub use roc::{auroc, fpr_at_tpr, roc_curve, Confusion, RocPoint};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("need both distributions: got {inliers} inliers and {outliers} outliers")]
    NeedBothDistributions { inliers: usize, outliers: usize },
    #[error("no samples")]
    Empty,
    #[error("non-finite anomaly score at sample {0}")]
    NonFinite(usize),
    #[error("{name} must be in {range}, got {value}")]
    OutOfRange {
        name: &'static str,
        range: &'static str,
        value: f64,
    },
}

pub type Result<T> = std::result::Result<T, MetricsError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredSample {
    pub anomaly: f64,
    pub is_outlier: bool,
    /// Meaningful only for inliers; accepted outliers always count as errors.
    pub inlier_correct: bool,
}

impl ScoredSample {
    pub fn inlier(anomaly: f64, correct: bool) -> Self {
        Self {
            anomaly,
            is_outlier: false,
            inlier_correct: correct,
        }
    }

    pub fn outlier(anomaly: f64) -> Self {
        Self {
            anomaly,
            is_outlier: true,
            inlier_correct: false,
        }
    }

    fn counts_as_correct(&self) -> bool {
        !self.is_outlier && self.inlier_correct
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Reject,
}

/// Accept iff `anomaly < threshold`.
pub fn apply_threshold(anomaly: f64, threshold: f64) -> Decision {
    if anomaly < threshold {
        Decision::Accept
    } else {
        Decision::Reject
    }
}

/// Samples sharing one anomaly value.
#[derive(Debug, Clone, Copy)]
struct Group {
    value: f64,
    inliers: usize,
    outliers: usize,
    correct: usize,
}

/// Groups by exact score, ascending.
fn grouped(samples: &[ScoredSample]) -> Result<Vec<Group>> {
    if let Some(i) = samples.iter().position(|s| !s.anomaly.is_finite()) {
        return Err(MetricsError::NonFinite(i));
    }
    let mut sorted: Vec<&ScoredSample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.anomaly.total_cmp(&b.anomaly));
    let mut groups: Vec<Group> = Vec::new();
    for s in sorted {
        // -0.0 and 0.0 compare equal and belong to one group
        let g = match groups.last_mut() {
            Some(g) if g.value == s.anomaly => g,
            _ => {
                groups.push(Group {
                    value: s.anomaly,
                    inliers: 0,
                    outliers: 0,
                    correct: 0,
                });
                groups.last_mut().unwrap()
            }
        };
        if s.is_outlier {
            g.outliers += 1;
        } else {
            g.inliers += 1;
        }
        if s.counts_as_correct() {
            g.correct += 1;
        }
    }
    Ok(groups)
}
