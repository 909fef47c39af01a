use super::{grouped, MetricsError, Result, ScoredSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub counts: Confusion,
}

fn totals(samples: &[ScoredSample]) -> Result<(usize, usize)> {
    let outliers = samples.iter().filter(|s| s.is_outlier).count();
    let inliers = samples.len() - outliers;
    if inliers == 0 || outliers == 0 {
        return Err(MetricsError::NeedBothDistributions { inliers, outliers });
    }
    Ok((inliers, outliers))
}

/// ROC points at thresholds `-inf`, every distinct score, and `+inf`, in
/// ascending threshold order (from reject-all to accept-all).
pub fn roc_curve(samples: &[ScoredSample]) -> Result<Vec<RocPoint>> {
    let (n_in, n_out) = totals(samples)?;
    let groups = grouped(samples)?;
    let point = |threshold: f64, rej_in: usize, rej_out: usize| {
        let counts = Confusion {
            tp: rej_out,
            fp: rej_in,
            tn: n_in - rej_in,
            fn_: n_out - rej_out,
        };
        RocPoint {
            threshold,
            tpr: rej_out as f64 / n_out as f64,
            fpr: rej_in as f64 / n_in as f64,
            counts,
        }
    };
    let mut points = Vec::with_capacity(groups.len() + 2);
    points.push(point(f64::NEG_INFINITY, n_in, n_out));
    // At threshold u_k every group from k upward is rejected.
    let (mut rej_in, mut rej_out) = (n_in, n_out);
    for g in &groups {
        points.push(point(g.value, rej_in, rej_out));
        rej_in -= g.inliers;
        rej_out -= g.outliers;
    }
    points.push(point(f64::INFINITY, 0, 0));
    Ok(points)
}

/// Trapezoidal area under the grouped ROC curve.
///
/// Accumulated in integer counts, so it equals the pairwise probability that
/// an outlier outscores an inlier (ties credited one half) up to one final
/// division.
pub fn auroc(samples: &[ScoredSample]) -> Result<f64> {
    let points = roc_curve(samples)?;
    let n_in = points[0].counts.fp as u128;
    let n_out = points[0].counts.tp as u128;
    let twice_area: u128 = points
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].counts, w[1].counts);
            (a.fp - b.fp) as u128 * (a.tp + b.tp) as u128
        })
        .sum();
    Ok(twice_area as f64 / (2 * n_in * n_out) as f64)
}

/// Smallest FPR over realizable thresholds whose TPR reaches `level`.
pub fn fpr_at_tpr(samples: &[ScoredSample], level: f64) -> Result<f64> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(MetricsError::OutOfRange {
            name: "TPR level",
            range: "(0, 1]",
            value: level,
        });
    }
    let points = roc_curve(samples)?;
    Ok(points
        .iter()
        .filter(|p| p.tpr >= level)
        .map(|p| p.fpr)
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{apply_threshold, Decision};
    use proptest::prelude::*;

    fn micro() -> Vec<ScoredSample> {
        let mut s: Vec<ScoredSample> = [0.1, 0.2, 0.3]
            .iter()
            .map(|&a| ScoredSample::inlier(a, true))
            .collect();
        s.extend([0.25, 0.4, 0.5].iter().map(|&a| ScoredSample::outlier(a)));
        s
    }

    #[test]
    fn micro_example() {
        let s = micro();
        let roc = roc_curve(&s).unwrap();
        assert_eq!(roc.len(), 8);
        assert!((auroc(&s).unwrap() - 8.0 / 9.0).abs() < 1e-15);
        assert!((fpr_at_tpr(&s, 0.95).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_separation() {
        let s = vec![
            ScoredSample::inlier(0.1, true),
            ScoredSample::inlier(0.2, true),
            ScoredSample::outlier(0.8),
            ScoredSample::outlier(0.9),
        ];
        let roc = roc_curve(&s).unwrap();
        assert!(roc.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        assert_eq!(auroc(&s).unwrap(), 1.0);
        assert_eq!(fpr_at_tpr(&s, 0.95).unwrap(), 0.0);
    }

    #[test]
    fn total_tie() {
        let s = vec![
            ScoredSample::inlier(0.4, true),
            ScoredSample::inlier(0.4, false),
            ScoredSample::outlier(0.4),
        ];
        let roc = roc_curve(&s).unwrap();
        for p in &roc {
            assert!((p.fpr, p.tpr) == (0.0, 0.0) || (p.fpr, p.tpr) == (1.0, 1.0));
        }
        assert_eq!(auroc(&s).unwrap(), 0.5);
        assert_eq!(fpr_at_tpr(&s, 0.95).unwrap(), 1.0);
    }

    #[test]
    fn single_distribution_rejected() {
        let s = vec![ScoredSample::inlier(0.1, true)];
        assert_eq!(
            roc_curve(&s).unwrap_err(),
            MetricsError::NeedBothDistributions { inliers: 1, outliers: 0 }
        );
        assert!(auroc(&[]).is_err());
        assert!(fpr_at_tpr(&micro(), 0.0).is_err());
        assert!(fpr_at_tpr(&micro(), 1.5).is_err());
    }

    fn scored_set() -> impl Strategy<Value = Vec<ScoredSample>> {
        // small integer grid forces ties
        prop::collection::vec((0u8..12, any::<bool>(), any::<bool>()), 2..40).prop_filter_map(
            "needs both classes",
            |v| {
                let s: Vec<ScoredSample> = v
                    .into_iter()
                    .map(|(a, out, ok)| ScoredSample {
                        anomaly: f64::from(a) / 10.0,
                        is_outlier: out,
                        inlier_correct: ok,
                    })
                    .collect();
                let outs = s.iter().filter(|x| x.is_outlier).count();
                (outs > 0 && outs < s.len()).then_some(s)
            },
        )
    }

    proptest! {
        #[test]
        fn points_match_threshold_filtering(s in scored_set()) {
            for p in roc_curve(&s).unwrap() {
                let mut c = Confusion::default();
                for x in &s {
                    match (apply_threshold(x.anomaly, p.threshold), x.is_outlier) {
                        (Decision::Reject, true) => c.tp += 1,
                        (Decision::Reject, false) => c.fp += 1,
                        (Decision::Accept, true) => c.fn_ += 1,
                        (Decision::Accept, false) => c.tn += 1,
                    }
                }
                prop_assert_eq!(c, p.counts);
            }
        }

        #[test]
        fn auroc_invariant_under_monotone_transform(s in scored_set()) {
            let t: Vec<ScoredSample> = s
                .iter()
                .map(|x| ScoredSample { anomaly: (3.0 * x.anomaly).exp() - 7.0, ..*x })
                .collect();
            prop_assert_eq!(auroc(&s).unwrap(), auroc(&t).unwrap());
        }

        #[test]
        fn label_flip_complements_without_ties(
            vals in prop::collection::hash_set(0u32..10_000, 2..40),
            flags in prop::collection::vec(any::<bool>(), 40),
        ) {
            let s: Vec<ScoredSample> = vals
                .iter()
                .zip(&flags)
                .map(|(&a, &o)| ScoredSample { anomaly: f64::from(a), is_outlier: o, inlier_correct: true })
                .collect();
            let outs = s.iter().filter(|x| x.is_outlier).count();
            prop_assume!(outs > 0 && outs < s.len());
            let flipped: Vec<ScoredSample> =
                s.iter().map(|x| ScoredSample { is_outlier: !x.is_outlier, ..*x }).collect();
            prop_assert!((auroc(&flipped).unwrap() - (1.0 - auroc(&s).unwrap())).abs() < 1e-12);
        }

        #[test]
        fn fpr_non_decreasing_in_level(s in scored_set(), a in 0.01f64..1.0, b in 0.01f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(fpr_at_tpr(&s, lo).unwrap() <= fpr_at_tpr(&s, hi).unwrap());
        }
    }
}
