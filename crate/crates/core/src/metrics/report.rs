use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{auroc, coverage_breakpoint, fpr_at_tpr, MetricsError, Result, ScoredSample};
use crate::supervisors::{Sample, Supervisor, SupervisorError};

/// Accepted-set accuracy target for Cov10 (10 % error).
pub const COV10_ACCURACY: f64 = 0.9;

/// The four threshold metrics for one scored inlier/outlier mix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub auroc: f64,
    pub fpr_at_95_tpr: f64,
    pub cbpl: f64,
    pub cov10: f64,
    pub n_inliers: usize,
    pub n_outliers: usize,
}

/// Computes all four metrics. `reference_accuracy` is the CBPL target,
/// normally the model's own test accuracy.
pub fn summarize(samples: &[ScoredSample], reference_accuracy: f64) -> Result<MetricSummary> {
    if let Some(i) = samples.iter().position(|s| !s.anomaly.is_finite()) {
        return Err(MetricsError::NonFinite(i));
    }
    let n_outliers = samples.iter().filter(|s| s.is_outlier).count();
    Ok(MetricSummary {
        auroc: auroc(samples)?,
        fpr_at_95_tpr: fpr_at_tpr(samples, 0.95)?,
        cbpl: coverage_breakpoint(samples, reference_accuracy)?,
        cov10: coverage_breakpoint(samples, COV10_ACCURACY)?,
        n_inliers: samples.len() - n_outliers,
        n_outliers,
    })
}

/// Scores every sample in parallel, keeping input order.
pub fn score_samples(
    supervisor: &Supervisor<'_>,
    inliers: &[Sample],
    outliers: &[Sample],
) -> std::result::Result<Vec<ScoredSample>, SupervisorError> {
    let inl = inliers.par_iter().map(|s| {
        supervisor
            .score(s)
            .map(|a| ScoredSample::inlier(a.value(), s.record.is_correct()))
    });
    let out = outliers
        .par_iter()
        .map(|s| supervisor.score(s).map(|a| ScoredSample::outlier(a.value())));
    inl.chain(out).collect()
}

pub fn evaluate(
    supervisor: &Supervisor<'_>,
    reference_accuracy: f64,
    inliers: &[Sample],
    outliers: &[Sample],
) -> std::result::Result<MetricSummary, SupervisorError> {
    if inliers.is_empty() || outliers.is_empty() {
        return Err(MetricsError::NeedBothDistributions {
            inliers: inliers.len(),
            outliers: outliers.len(),
        }
        .into());
    }
    let scored = score_samples(supervisor, inliers, outliers)?;
    Ok(summarize(&scored, reference_accuracy)?)
}

/// One evaluation cell as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model_id: String,
    pub epoch: Option<u32>,
    pub test_accuracy: f64,
    pub supervisor: String,
    pub config: serde_json::Value,
    pub ood_set: String,
    pub auroc: f64,
    pub fpr_at_95_tpr: f64,
    pub cbpl: f64,
    pub cov10: f64,
    pub n_inliers: usize,
    pub n_outliers: usize,
}

impl EvaluationReport {
    pub fn new(
        model_id: impl Into<String>,
        epoch: Option<u32>,
        test_accuracy: f64,
        supervisor: &Supervisor<'_>,
        ood_set: impl Into<String>,
        m: MetricSummary,
    ) -> Self {
        Self {
            model_id: model_id.into(),
            epoch,
            test_accuracy,
            supervisor: supervisor.kind().name().to_string(),
            config: supervisor.config().params_json(),
            ood_set: ood_set.into(),
            auroc: m.auroc,
            fpr_at_95_tpr: m.fpr_at_95_tpr,
            cbpl: m.cbpl,
            cov10: m.cov10,
            n_inliers: m.n_inliers,
            n_outliers: m.n_outliers,
        }
    }

    pub fn summary(&self) -> MetricSummary {
        MetricSummary {
            auroc: self.auroc,
            fpr_at_95_tpr: self.fpr_at_95_tpr,
            cbpl: self.cbpl,
            cov10: self.cov10,
            n_inliers: self.n_inliers,
            n_outliers: self.n_outliers,
        }
    }
}
