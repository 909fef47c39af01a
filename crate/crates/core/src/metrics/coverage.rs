use super::{grouped, MetricsError, Result, ScoredSample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoveragePoint {
    /// Acceptance threshold realizing this point (`a < threshold` accepted).
    pub threshold: f64,
    /// Accepted / all samples, inliers and outliers combined.
    pub coverage: f64,
    /// Correct accepted inliers / accepted; 1 for the reject-all point.
    pub accuracy: f64,
    pub accepted: usize,
    pub correct: usize,
}

/// Coverage and accepted-set accuracy, from reject-all up to accept-all.
pub fn coverage_curve(samples: &[ScoredSample]) -> Result<Vec<CoveragePoint>> {
    if samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    let groups = grouped(samples)?;
    let total = samples.len() as f64;
    let mut points = Vec::with_capacity(groups.len() + 1);
    points.push(CoveragePoint {
        threshold: groups[0].value,
        coverage: 0.0,
        accuracy: 1.0,
        accepted: 0,
        correct: 0,
    });
    let (mut accepted, mut correct) = (0usize, 0usize);
    for (k, g) in groups.iter().enumerate() {
        accepted += g.inliers + g.outliers;
        correct += g.correct;
        let threshold = groups.get(k + 1).map_or(f64::INFINITY, |next| next.value);
        points.push(CoveragePoint {
            threshold,
            coverage: accepted as f64 / total,
            accuracy: correct as f64 / accepted as f64,
            accepted,
            correct,
        });
    }
    Ok(points)
}

/// Largest coverage whose accepted-set accuracy is at least `min_accuracy`.
pub fn coverage_breakpoint(samples: &[ScoredSample], min_accuracy: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&min_accuracy) {
        return Err(MetricsError::OutOfRange {
            name: "min_accuracy",
            range: "[0, 1]",
            value: min_accuracy,
        });
    }
    Ok(coverage_curve(samples)?
        .iter()
        .filter(|p| p.accuracy >= min_accuracy)
        .map(|p| p.coverage)
        .fold(0.0, f64::max))
}
